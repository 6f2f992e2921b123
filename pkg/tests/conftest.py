import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def toy_workspace(tmp_path_factory):
    """Default-config grid workspace (2000 train / 400 test) with targets for both stages."""
    from latentcanvas.cli.config import RunConfig
    from latentcanvas.cli.main import cmd_filter, cmd_gen, cmd_targets

    root = tmp_path_factory.mktemp("toy")
    cfg = RunConfig.load(None, [f'paths.{k}="{root / k}"' for k in ("data", "cache", "checkpoints", "reports")])
    cmd_gen(cfg)
    cmd_filter(cfg)
    cmd_targets(cfg, "all")
    return cfg


def trained_toy(cfg, seed: int):
    """Train (or reuse) the default toy model for ``seed``; returns the per-seed config."""
    from latentcanvas.cli.config import RunConfig
    from latentcanvas.cli.main import cmd_train

    data = dict(cfg.data, seed=seed, paths=dict(cfg.data["paths"]))
    data["paths"]["checkpoints"] = str(Path(cfg.data["paths"]["checkpoints"]) / f"seed-{seed}")
    scfg = RunConfig(data, cfg.base_dir)
    cmd_train(scfg)
    return scfg


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _ACCEPTANCE.setdefault(props["criterion"], []).append(
            (report.passed, props.get("title", ""), props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=int):
        runs = _ACCEPTANCE[key]
        status = "PASS" if all(r[0] for r in runs) else "FAIL"
        detail = "; ".join(r[2] for r in runs if r[2])
        tr.write_line(f"criterion {int(key):2d} {status}  {runs[0][1]}" + (f" | {detail}" if detail else ""))
