import subprocess
import sys

import pytest

SCENARIOS = ("fig1", "fig2", "fig3", "fig4")


@pytest.fixture(scope="session")
def scenario_outputs(tmp_path_factory):
    """Generate primary outputs for every built-in scenario via the CLI.

    The renderer is exercised strictly against the on-disk interface, so
    the fixture shells out to the primary package instead of importing it.
    """
    out = tmp_path_factory.mktemp("runs")
    for name in SCENARIOS:
        proc = subprocess.run(
            [sys.executable, "-m", "cintlab.cli", "scenario",
             "--name", name, "--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    return out
