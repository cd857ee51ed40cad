#!/usr/bin/env python3
"""Fetch the public scheduling benchmark sets used by the acceptance suite.

Downloads (network required):
  data/benchmarks/brandimarte/mk01.fjs .. mk10.fjs   (Brandimarte FJSP)
  data/benchmarks/hurink_{edata,rdata,vdata}/*.fjs   (Hurink FJSP variants)
  data/benchmarks/taillard/ta01.jssp .. ta80.jssp    (Taillard JSSP)

The Taillard site serves ten instances per size file; they are split here
into one `.jssp` file each (header line `jobs machines`, then the duration
matrix and the 1-indexed machine matrix, which is exactly the layout the
flexsched parser reads).
"""

import io
import sys
import urllib.request
import zipfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "data" / "benchmarks"

# Mastrolilli's FJSP text data (Brandimarte + Hurink) and mirrors of it.
FJSP_ZIP_URLS = [
    "https://people.idsia.ch/~monaldo/fjspresults/TextData.zip",
    "http://people.idsia.ch/~monaldo/fjspresults/TextData.zip",
]

TAILLARD_BASE = "http://mistic.heig-vd.ch/taillard/problemes.dir/ordonnancement.dir/jobshop.dir"
TAILLARD_FILES = [
    ("tai15_15.txt", 1),
    ("tai20_15.txt", 11),
    ("tai20_20.txt", 21),
    ("tai30_15.txt", 31),
    ("tai30_20.txt", 41),
    ("tai50_15.txt", 51),
    ("tai50_20.txt", 61),
    ("tai100_20.txt", 71),
]


def fetch(url: str, timeout: int = 60) -> bytes:
    print(f"  GET {url}")
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def fetch_fjsp_sets() -> bool:
    data = None
    for url in FJSP_ZIP_URLS:
        try:
            data = fetch(url)
            break
        except Exception as e:  # noqa: BLE001 - report and try the next mirror
            print(f"  failed: {e}")
    if data is None:
        return False
    archive = zipfile.ZipFile(io.BytesIO(data))
    copied = 0
    for info in archive.infolist():
        name = info.filename.lower()
        if not name.endswith(".fjs"):
            continue
        stem = Path(info.filename).stem.lower()
        if "brandimarte" in name or stem.startswith("mk"):
            out_dir = ROOT / "brandimarte"
            # normalize Mk1 -> mk01 style
            digits = "".join(ch for ch in stem if ch.isdigit())
            out_name = f"mk{int(digits):02d}.fjs" if digits else f"{stem}.fjs"
        elif "edata" in name:
            out_dir, out_name = ROOT / "hurink_edata", f"{stem}.fjs"
        elif "rdata" in name:
            out_dir, out_name = ROOT / "hurink_rdata", f"{stem}.fjs"
        elif "vdata" in name:
            out_dir, out_name = ROOT / "hurink_vdata", f"{stem}.fjs"
        else:
            continue
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / out_name).write_bytes(archive.read(info))
        copied += 1
    print(f"  extracted {copied} .fjs files")
    return copied > 0


def split_taillard(text: str, first_index: int, out_dir: Path) -> int:
    """Taillard job-shop files: per instance a comment line, a numbers line
    (jobs, machines, seeds, bounds), a 'Times' block and a 'Machines' block."""
    lines = [ln.strip() for ln in text.splitlines()]
    written = 0
    i = 0
    index = first_index
    while i < len(lines):
        if not lines[i].lower().startswith("nb of jobs"):
            i += 1
            continue
        header = lines[i + 1].split()
        jobs, machines = int(header[0]), int(header[1])
        i += 2
        while i < len(lines) and not lines[i].lower().startswith("times"):
            i += 1
        times = []
        i += 1
        while len(times) < jobs:
            times.append(lines[i].split())
            i += 1
        while i < len(lines) and not lines[i].lower().startswith("machines"):
            i += 1
        machs = []
        i += 1
        while len(machs) < jobs:
            machs.append(lines[i].split())
            i += 1
        out = [f"{jobs} {machines}"]
        out += [" ".join(row) for row in times]
        out += [" ".join(row) for row in machs]
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"ta{index:02d}.jssp").write_text("\n".join(out) + "\n")
        written += 1
        index += 1
    return written


def fetch_taillard() -> bool:
    out_dir = ROOT / "taillard"
    total = 0
    for filename, first_index in TAILLARD_FILES:
        try:
            text = fetch(f"{TAILLARD_BASE}/{filename}").decode("utf-8", "replace")
        except Exception as e:  # noqa: BLE001
            print(f"  failed: {e}")
            continue
        total += split_taillard(text, first_index, out_dir)
    print(f"  wrote {total} taillard instances")
    return total > 0


def main() -> int:
    ok = True
    print("Fetching Brandimarte + Hurink (FJSP)...")
    if not fetch_fjsp_sets():
        ok = False
        print("  could not fetch the FJSP sets; place .fjs files under "
              f"{ROOT}/brandimarte and {ROOT}/hurink_* manually")
    print("Fetching Taillard (JSSP)...")
    if not fetch_taillard():
        ok = False
        print(f"  could not fetch Taillard; place .jssp files under {ROOT}/taillard manually")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
