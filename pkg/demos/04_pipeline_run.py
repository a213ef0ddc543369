"""Run every stage from a configuration file, re-run it, and verify the artifacts.

The second run finds all stages current and skips them. ``verify`` re-hashes
every output against the manifest.
"""

import sys
import tempfile
from pathlib import Path

from hypadbgnn import cli

CONFIG = """\
name = demo
synth = weighted
synth_paths = 4096
variants = hypa,minus,edge,z
repetitions = 5
grid = 8,16
max_epochs = 100
lr = 0.01
"""

with tempfile.TemporaryDirectory() as tmp:
    cfg = Path(tmp) / "demo.cfg"
    cfg.write_text(CONFIG)
    out = Path(tmp) / "out"
    for attempt in ("first run", "second run"):
        print(f"--- {attempt}")
        rc = cli.main(["run", "--config", str(cfg), "--out-dir", str(out)])
        if rc:
            sys.exit(rc)
    print("--- artifacts:", ", ".join(sorted(p.name for p in out.iterdir())))
    sys.exit(cli.main(["verify", "--dir", str(out)]))
