"""Regenerate the bundled UCI CSVs under src/cife/datasets/.

Wine, Pima and Ionosphere are copied from data files shipped inside public
PyPI wheels (``keel-ds`` and ``Orange3``), fetched with ``pip download``.
Balance-scale is generated: the UCI file is the full 5^4 grid of
(left weight, left distance, right weight, right distance) labelled by torque.

    python scripts/build_datasets.py
"""
import csv
import glob
import itertools
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "cife" / "datasets"


def _wheel(name, tmp):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", name, "--no-deps", "-d", tmp],
        check=True,
        capture_output=True,
    )
    return zipfile.ZipFile(glob.glob(str(Path(tmp) / "*.whl"))[0])


def _keel_rows(text):
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        yield [cell.strip() for cell in line.split(",")]


def _write(name, header, rows):
    with open(OUT / f"{name}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    print(f"{name}: {len(rows)} rows")


def balance_scale():
    rows = []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        label = "L" if left > right else "R" if right > left else "B"
        rows.append([lw, ld, rw, rd, label])
    _write("balance-scale", ["left_weight", "left_distance", "right_weight", "right_distance", "class"], rows)


def keel(name, out_name):
    with tempfile.TemporaryDirectory() as tmp:
        z = _wheel("keel-ds==0.2.5", tmp)
        text = z.read(f"keel_ds/data/balanced/raw/{name}.dat").decode()
    rows = list(_keel_rows(text))
    header = [f"a{i + 1}" for i in range(len(rows[0]) - 1)] + ["class"]
    _write(out_name, header, rows)


def ionosphere():
    with tempfile.TemporaryDirectory() as tmp:
        z = _wheel("orange3==3.39.0", tmp)
        text = z.read("Orange/tests/datasets/ionosphere.tab").decode()
    lines = text.splitlines()
    header = lines[0].split("\t")
    rows = [line.split("\t") for line in lines[3:] if line.strip()]
    _write("ionosphere", header, rows)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    balance_scale()
    keel("wine", "wine")
    keel("pima", "pima")
    ionosphere()
