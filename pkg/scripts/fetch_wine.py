"""Write the UCI wine data (178 x 13, bundled with scikit-learn) as a CSV
with a 'class' column in 1..3.

    python scripts/fetch_wine.py runs/wine.csv
"""

import csv
import sys
from pathlib import Path


def write_wine_csv(path):
    from sklearn.datasets import load_wine

    wine = load_wine()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*wine.feature_names, "class"])
        for row, y in zip(wine.data, wine.target):
            w.writerow([*(repr(float(v)) for v in row), int(y) + 1])
    return path


if __name__ == "__main__":
    write_wine_csv(sys.argv[1] if len(sys.argv) > 1 else "wine.csv")
