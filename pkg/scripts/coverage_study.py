"""Coverage of the reported 1-sigma fit intervals over noisy synthetic replicates."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from test_acceptance import _coverage  # noqa: E402


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicates", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    for (model, name), c in _coverage(args.replicates, args.seed).items():
        print(f"{model:13s} {name:9s} {c:.3f}")


if __name__ == "__main__":
    main()
