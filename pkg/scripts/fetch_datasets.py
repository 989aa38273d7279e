"""Fetch the benchmark CSV files into ./data.

The UCI/ProPublica files are not redistributed with this package. Copies of
them ship inside a few PyPI wheels, so we pull them from there:

* ``compas-scores-two-years.csv`` and ``adult.data`` from ``responsibly``
* ``UCI_Credit_Card.csv`` (a 6000-row, 5-column excerpt of the Taiwan
  default-of-credit-card dataset) from ``skorecard``

If you have the original files, drop them into ./data instead.
"""
import argparse
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

SOURCES = {
    "responsibly==0.1.2": {
        "responsibly/dataset/compas/compas-scores-two-years.csv": "compas-scores-two-years.csv",
        "responsibly/dataset/adult/adult.data": "adult.data",
    },
    "skorecard==1.6.9": {
        "skorecard/data/UCI_Credit_Card.zip": None,
    },
}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dest", default=Path(__file__).resolve().parent.parent / "data", type=Path)
    args = parser.parse_args(argv)
    args.dest.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        for req, members in SOURCES.items():
            if all(out and (args.dest / out).exists() for out in members.values()):
                continue
            subprocess.run(
                [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, req],
                check=True,
            )
            wheel = next(Path(tmp).glob(req.split("==")[0] + "-*.whl"))
            with zipfile.ZipFile(wheel) as zf:
                for member, out in members.items():
                    payload = zf.read(member)
                    if out is None:
                        # nested zip archive
                        with zipfile.ZipFile(io.BytesIO(payload)) as inner:
                            inner.extractall(args.dest)
                    else:
                        (args.dest / out).write_bytes(payload)
    for f in sorted(args.dest.iterdir()):
        print(f)


if __name__ == "__main__":
    main()
