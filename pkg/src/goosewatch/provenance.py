"""Provenance headers and configuration hashing for output files.

Headers carry the tool version and a hash of the semantic configuration
only (never paths or wall-clock time), so identical runs produce
byte-identical outputs.
"""

import hashlib
import json

from goosewatch import __version__


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def header_line(config: dict) -> str:
    return f"# goosewatch={__version__} config={config_hash(config)}"
