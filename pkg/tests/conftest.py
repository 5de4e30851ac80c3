import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from seatnet.data import MANIFEST_HEADER, TIMES_OF_DAY


def make_production_shaped_rows():
    """12,042 rows over 120 cars with 3,721 driver / 8,321 passenger images,
    mirroring the production corpus's shape. Deterministic."""
    rows = []
    image_counts = [101 if car < 42 else 100 for car in range(120)]
    driver_counts = [32 if car == 0 else 31 for car in range(120)]
    makes = ["alder", "birch", "cedar", "dogwood", "elm"]
    idx = 0
    for car in range(120):
        car_id = f"car{car:04d}"
        for k in range(image_counts[car]):
            seat = (
                "driver"
                if k < driver_counts[car]
                else ("front_passenger" if k % 2 == 0 else "rear_passenger")
            )
            rows.append(
                [
                    f"images/img{idx:06d}.pgm",
                    car_id,
                    seat,
                    makes[car % len(makes)],
                    f"model{car % 7}",
                    str(1996 + car % 25),
                    TIMES_OF_DAY[idx % 5],
                ]
            )
            idx += 1
    return rows


@pytest.fixture(scope="session")
def corpus_manifest_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("manifest") / "production_shaped.csv"
    rows = make_production_shaped_rows()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(MANIFEST_HEADER) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return path


@pytest.fixture()
def rand():
    return np.random.RandomState(20260808)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if not acceptance_log.RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, passed, detail in acceptance_log.RESULTS:
        status = "PASS" if passed else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(f"[{status}] {name}{suffix}")
