#!/usr/bin/env python3
"""Assemble the four benchmark datasets in their raw formats.

Adult, COMPAS and German Credit are copied verbatim from the `responsibly`
wheel. Communities and Crime is rebuilt in the UCI `communities.data`
layout from the cleaned table shipped with `ethicml`: `state` is decoded
from its one-hot columns, and columns absent there (county, community and
the ones with missing values in the UCI file) are written as `?`.

Usage: fetch_datasets.py [OUT_DIR]   (default: ./data)
"""

import csv
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

WHEELS = {"responsibly": "0.1.2", "ethicml": "1.3.0"}

RESPONSIBLY_FILES = {
    "responsibly/dataset/adult/adult.data": "adult.data",
    "responsibly/dataset/adult/adult.test": "adult.test",
    "responsibly/dataset/compas/compas-scores-two-years.csv": "compas-scores-two-years.csv",
    "responsibly/dataset/german/german.data": "german.data",
}

CRIME_CSV = "ethicml/data/csvs/crime.csv"


def communities_columns(repo: Path) -> list[str]:
    src = (repo / "crates/core/src/data/presets.rs").read_text()
    block = src.split("COMMUNITIES_COLUMNS")[1].split("];")[0]
    cols = [part.split('"')[1] for part in block.split(",") if '"' in part]
    assert len(cols) == 128, len(cols)
    return cols


def download(tmp: Path) -> dict[str, Path]:
    out = {}
    for name, version in WHEELS.items():
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-d", str(tmp), f"{name}=={version}"],
            check=True,
        )
        out[name] = next(tmp.glob(f"{name}-{version}-*.whl"))
    return out


def rebuild_communities(table: str, columns: list[str]) -> str:
    reader = csv.DictReader(io.StringIO(table))
    lines = []
    for row in reader:
        states = [k.split("_", 1)[1] for k, v in row.items() if k.startswith("state_") and v == "1"]
        assert len(states) == 1, states
        row["state"] = states[0]
        lines.append(",".join(row.get(c, "?") for c in columns))
    return "\n".join(lines) + "\n"


def main() -> None:
    repo = Path(__file__).resolve().parent.parent
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else repo / "data"
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        wheels = download(Path(tmp))
        with zipfile.ZipFile(wheels["responsibly"]) as z:
            for member, name in RESPONSIBLY_FILES.items():
                (out / name).write_bytes(z.read(member))
        with zipfile.ZipFile(wheels["ethicml"]) as z:
            table = z.read(CRIME_CSV).decode()
    (out / "communities.data").write_text(rebuild_communities(table, communities_columns(repo)))
    for p in sorted(out.iterdir()):
        print(f"{p.stat().st_size:>10}  {p}")


if __name__ == "__main__":
    main()
