"""Versioned model snapshots.

Layout: one ASCII header line ``driftids-model <version> <class>`` then
a pickle of the model. Pickle keeps every counter and float bit-exact.
"""

import pickle

from ..errors import SnapshotVersionError

MAGIC = b"driftids-model"
FORMAT_VERSION = 1


def dumps(model) -> bytes:
    header = b"%s %d %s\n" % (MAGIC, FORMAT_VERSION, type(model).__name__.encode())
    return header + pickle.dumps(model, protocol=pickle.HIGHEST_PROTOCOL)


def loads(blob: bytes):
    header, _, payload = blob.partition(b"\n")
    parts = header.split(b" ")
    if len(parts) != 3 or parts[0] != MAGIC:
        raise SnapshotVersionError("not a driftids model snapshot")
    version = int(parts[1])
    if version != FORMAT_VERSION:
        raise SnapshotVersionError(f"snapshot version {version}, expected {FORMAT_VERSION}")
    model = pickle.loads(payload)
    if type(model).__name__.encode() != parts[2]:
        raise SnapshotVersionError("snapshot header does not match its payload")
    return model


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
