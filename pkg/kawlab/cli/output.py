"""
Run output directory: atomic file writes and a hashed manifest.
"""

import hashlib
import json
import logging
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from kawlab import __version__
from kawlab.common.report import Report
from kawlab.common.signal_io import signal_bytes

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"


def atomic_write(path: Path, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_of(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def gnuplot_script(csv_name: str, title: str, x: str, ys: Sequence[str], logscale: bool = False) -> str:
    """Plain gnuplot script plotting columns of a headed CSV file."""
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{x}'",
    ]
    if logscale:
        lines.append("set logscale y")
    plots = [f"'{csv_name}' using '{x}':'{y}' with linespoints" for y in ys]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


class RunOutput:
    """Collects the files of one run and writes the manifest last."""

    def __init__(self, directory, stamp: bool = False, binary_signals: bool = False):
        self.directory = Path(directory)
        self.stamp = stamp
        self.binary_signals = binary_signals
        self.entries: Dict[str, Dict] = {}

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.directory / name
        atomic_write(path, data)
        self.entries[name] = {"sha256": sha256_of(data), "bytes": len(data)}
        logger.debug(f"wrote {path} ({len(data)} bytes)")
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_report(self, name: str, report: Report) -> Path:
        """Report text plus one CSV per table."""
        path = self.write_text(f"{name}.report", report.to_text())
        for table_name, table in report.tables.items():
            self.write_text(f"{name}.{table_name}.csv", table.csv())
        return path

    def write_signal(self, name: str, x) -> Path:
        suffix = ".cvec.bin" if self.binary_signals else ".cvec"
        return self.write_bytes(name + suffix, signal_bytes(x, self.binary_signals))

    def write_plot(self, name: str, csv_name: str, title: str, x: str, ys: Sequence[str],
                   logscale: bool = False) -> Path:
        return self.write_text(f"{name}.gp", gnuplot_script(csv_name, title, x, ys, logscale))

    @property
    def files(self) -> List[str]:
        return sorted(self.entries)

    def manifest(self, experiment: str, seed: int) -> Dict:
        data: Dict = {"kawlab": __version__, "experiment": experiment, "seed": seed}
        if self.stamp:
            data["created"] = datetime.now(timezone.utc).isoformat()
        data["files"] = [{"path": name, **self.entries[name]} for name in self.files]
        return data

    def finalize(self, experiment: str, seed: int) -> Path:
        text = json.dumps(self.manifest(experiment, seed), indent=2, sort_keys=False) + "\n"
        path = self.directory / MANIFEST_FILE
        atomic_write(path, text.encode("utf-8"))
        logger.info(f"Manifest lists {len(self.entries)} files in {self.directory}")
        return path


def read_manifest(directory) -> Optional[Dict]:
    path = Path(directory) / MANIFEST_FILE
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))
