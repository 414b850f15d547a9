from pathlib import Path

import pytest

from app.main import main

# Observed cells of the reconstructed 4 x 4 example (users and items 1-4).
EXAMPLE_CSV = """\
# user,item,rating
1,1,0.98
1,2,2.87
1,4,3.88
2,1,5.14
2,3,4.32
2,4,4.46
3,1,3.94
3,3,1.45
3,4,0.76
4,3,4.33
4,4,4.71
"""

# Small explicit ratings where user "carol" rated every item.
RATINGS_CSV = """\
user,item,rating
alice,matrix,5
alice,alien,3
alice,heat,4
bob,matrix,4
bob,up,2
carol,matrix,1
carol,alien,2
carol,heat,5
carol,up,3
dave,alien,4
dave,up,5
"""


@pytest.fixture
def run(capsys):
    """Runs the CLI and returns (exit code, stdout, stderr)."""

    def invoke(*argv: str) -> tuple[int, str, str]:
        code = main([str(arg) for arg in argv])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return invoke


@pytest.fixture
def example_csv(tmp_path) -> Path:
    path = tmp_path / "example.csv"
    path.write_text(EXAMPLE_CSV)
    return path


@pytest.fixture
def ratings_csv(tmp_path) -> Path:
    path = tmp_path / "ratings.csv"
    path.write_text(RATINGS_CSV)
    return path


@pytest.fixture
def svd_model(run, example_csv, tmp_path) -> Path:
    """The example trained with the traditional SVD recommender at full rank."""
    output = tmp_path / "svd.json"
    code, _, err = run(
        "train", "--algo", "svd", "--input", example_csv, "--output", output,
        "--scale", "0,6", "--rank-rule", "fixed:4", "--similarity-mode", "paper-dot",
    )
    assert code == 0, err
    return output


@pytest.fixture
def funk_model(run, ratings_csv, tmp_path) -> Path:
    output = tmp_path / "funk.json"
    code, _, err = run(
        "train", "--algo", "funk", "--input", ratings_csv, "--header", "--output", output,
        "--factors", "2", "--epochs", "30", "--alpha", "0.02", "--seed", "1",
    )
    assert code == 0, err
    return output
