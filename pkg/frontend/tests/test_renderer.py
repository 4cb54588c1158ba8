import hashlib
import os
import shutil

import pytest

from cintlab_figures import FigureSpec, render, main
from conftest import SCENARIOS


def dir_checksums(d):
    out = {}
    for name in sorted(os.listdir(d)):
        p = os.path.join(d, name)
        with open(p, "rb") as f:
            out[name] = hashlib.sha256(f.read()).hexdigest()
    return out


@pytest.mark.parametrize("name", SCENARIOS)
def test_five_panel_figure_per_scenario(scenario_outputs, tmp_path, name):
    run_dir = scenario_outputs / name
    before = dir_checksums(run_dir)
    out = tmp_path / f"{name}.png"
    info = render(FigureSpec(scenario_dir=str(run_dir), out_path=str(out)))
    assert out.exists() and out.stat().st_size > 0
    assert info["panels"] == 5
    assert dir_checksums(run_dir) == before, "inputs were modified"


def test_missing_twopoint_named(scenario_outputs, tmp_path):
    src = scenario_outputs / "fig1"
    work = tmp_path / "fig1"
    shutil.copytree(src, work)
    (work / "twopoint.bin").unlink()
    with pytest.raises(FileNotFoundError, match="twopoint.bin"):
        render(FigureSpec(scenario_dir=str(work), out_path=str(tmp_path / "x.png")))


def test_empty_image_renders_with_warning(scenario_outputs, tmp_path):
    src = scenario_outputs / "fig1"
    work = tmp_path / "fig1"
    shutil.copytree(src, work)
    (work / "image_pr.csv").write_text("y,re,im,abs\n")
    out = tmp_path / "warn.png"
    with pytest.warns(UserWarning, match="empty image"):
        info = render(FigureSpec(scenario_dir=str(work), out_path=str(out)))
    assert out.exists() and info["panels"] == 5


def test_cli_roundtrip(scenario_outputs, tmp_path, capsys):
    out = tmp_path / "cli.png"
    rc = main(["--scenario-dir", str(scenario_outputs / "fig2"),
               "--out", str(out)])
    assert rc == 0
    assert out.exists()


def test_cli_missing_dir(tmp_path, capsys):
    rc = main(["--scenario-dir", str(tmp_path / "nope"),
               "--out", str(tmp_path / "x.png")])
    assert rc == 1
    assert "manifest.json" in capsys.readouterr().err
