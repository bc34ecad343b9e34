import os
import json
import hashlib
import logging
import tempfile
from typing import Any, Optional

import numpy as np

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "PREPBENCH_THREADS"


def load_json(file_path: str) -> Any:
    with open(file_path, 'r', encoding="utf-8") as json_file:
        data = json.load(json_file)
    return data


def to_jsonable(value: Any) -> Any:
    """Recursively converts numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def write_text_atomic(file_path: str, text: str) -> None:
    """Writes to a temporary file in the target directory, then renames it over the target."""
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(file_path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as tmp_file:
            tmp_file.write(text)
        os.replace(tmp_path, file_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def dump_json(file_path: str, data: Any) -> None:
    write_text_atomic(file_path, json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n")


def print_banner(*messages: str, banner_length: int = 80) -> None:
    """Logs a banner out of any number of messages."""
    border = "*" * banner_length
    logger.info(border)
    for message in messages:
        logger.info(message.center(banner_length))
    logger.info(border)


def derive_seed(master_seed: int, *keys: Any) -> int:
    """
    Derives an independent 64-bit seed from a master seed and any number of keys.

    Keys are hashed (sha256 of their repr) so that string keys such as method names give stable,
    platform-independent seeds; the result feeds numpy's SeedSequence.
    """
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF]
    for key in keys:
        digest = hashlib.sha256(repr(key).encode("utf-8")).digest()
        entropy.append(int.from_bytes(digest[:8], "little"))
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def worker_count(requested: Optional[int] = None) -> int:
    """Number of workers for the job pool: the request (or the CPU count), capped by PREPBENCH_THREADS."""
    count = requested if requested else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV_VAR)
    if cap:
        try:
            count = min(count, max(1, int(cap)))
        except ValueError:
            logger.warning(f"Ignoring {THREADS_ENV_VAR}={cap!r}: not an integer")
    return max(1, count)
