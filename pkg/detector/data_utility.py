import hashlib
import os
import random
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import torch

"""
Utility functions used in "handle_data.py", "manifest.py", "trainer.py"
and "weights.py"
"""


def seedall(seed):
    """seeds all sources of randomness"""
    torch.manual_seed(seed)
    random.seed(seed)
    np.random.seed(seed)


def file_hash(path, chunk_size=1 << 20):
    """sha256 hex digest of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


@contextmanager
def atomic_write(path, mode="wb", **kwargs):
    """Writes to a temporary file next to -path, renamed over it on success

    path (str or Path): final destination
    mode (str): "wb" or "w"

    Yields:
        (file object): open temporary file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **kwargs) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise

