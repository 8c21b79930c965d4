import copy
import json
import math
from typing import Any, Dict, Optional

import ml_collections as mlc

from iscat.common.errors import ConfigError, InvalidArgumentError
from iscat.common.grid import make_grid
from iscat.forward.scene import ScatteringScene, make_scene

PRESETS = ("desk", "full", "tiny")


def experiment_config(name: str = "desk") -> mlc.ConfigDict:
    c = copy.deepcopy(config)
    if name == "desk":
        # 32x32 over 2 wavelengths, 16 antennas on a 4-wavelength circle
        pass
    elif name == "full":
        # 64x64 over 5.6 wavelengths, 36 antennas on a 10-wavelength circle
        c.scene.nx = 64
        c.scene.ny = 64
        c.scene.side_lambda = 5.6
        c.scene.n_tx = 36
        c.scene.n_rx = 36
        c.scene.radius_lambda = 10.0
        c.dataset.n_train = 1000
        c.dataset.n_test = 2000
        c.net.depth = 4
        c.net.base_channels = 64
        c.train.lr0 = 5e-6
        c.train.epochs = 150
    elif name == "tiny":
        # Smoke-test scale
        c.scene.nx = 16
        c.scene.ny = 16
        c.scene.side_lambda = 1.2
        c.scene.n_tx = 8
        c.scene.n_rx = 8
        c.scene.radius_lambda = 3.0
        c.dataset.n_train = 8
        c.dataset.n_val = 2
        c.dataset.n_test = 4
        c.net.depth = 1
        c.net.base_channels = 4
        c.train.epochs = 3
        c.train.batch_size = 4
        c.classic.outer_max = 2
        c.classic.max_inner = 20
        c.eval.n_bim = 1
        c.eval.n_panels = 1
        c.report.epochs = 2
    else:
        raise ConfigError(f"Invalid preset name {name!r}; choose from {PRESETS}")

    c.lock()
    return c


def _merge(c: mlc.ConfigDict, d: Dict[str, Any], path: str = ""):
    for k, v in d.items():
        where = f"{path}{k}"
        if k not in c:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(c[k], mlc.ConfigDict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where!r} must be an object")
            _merge(c[k], v, where + ".")
        else:
            try:
                c[k] = v
            except (TypeError, ValueError) as e:
                raise ConfigError(f"bad value for {where!r}: {e}") from None


def load_config(path: Optional[str] = None, preset: Optional[str] = None) -> mlc.ConfigDict:
    """Reads a JSON experiment description on top of a preset.

    A top-level "preset" key selects the base configuration; ``preset``
    overrides it. Unknown keys and ill-typed values raise ConfigError.
    """
    doc = {}
    if path is not None:
        try:
            with open(path) as fp:
                doc = json.load(fp)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path} must hold a JSON object")

    doc = dict(doc)
    name = preset or doc.pop("preset", "desk")
    doc.pop("preset", None)
    c = experiment_config(name)
    _merge(c, doc)
    validate_config(c)
    return c


def validate_config(c: mlc.ConfigDict):
    problems = []

    def check(ok, msg):
        if not ok:
            problems.append(msg)

    s = c.scene
    check(s.nx >= 4 and s.ny >= 4, "scene grid must be at least 4x4")
    check(s.side_lambda > 0 and s.lambda0 > 0, "scene lengths must be positive")
    check(s.n_tx >= 1 and s.n_rx >= 1, "scene needs at least one transmitter and receiver")
    # The DOI corner must sit inside the antenna circle
    check(
        s.radius_lambda > s.side_lambda / math.sqrt(2),
        "antenna circle must enclose the DOI",
    )
    check(s.solver in ("dense", "krylov"), f"unknown solver {s.solver!r}")

    d = c.dataset
    check(d.kind in ("digit", "polygon", "austria", "disk"), f"unknown phantom kind {d.kind!r}")
    check(len(d.eps_range) == 2, "eps_range must have two entries")
    if len(d.eps_range) == 2:
        check(d.eps_range[0] >= 1 and d.eps_range[1] >= d.eps_range[0], "eps_range needs 1 <= lo <= hi")
    check(d.n_train >= 1 and d.n_test >= 1 and d.n_val >= 0, "sample counts must be positive")
    check(all(math.isfinite(x) for x in d.snr_list), "snr_list entries must be finite")

    n = c.net
    check(n.depth >= 1, "net depth must be at least 1")
    check(n.base_channels >= 1, "net base_channels must be positive")
    step = 2 ** max(n.depth, 0)
    check(s.nx % step == 0 and s.ny % step == 0, f"grid must be divisible by 2^depth = {step}")

    t = c.train
    check(t.lr0 > 0, "lr0 must be positive")
    check(0 <= t.momentum < 1, "momentum must be in [0, 1)")
    check(t.epochs >= 1 and t.batch_size >= 1, "epochs and batch_size must be positive")
    check(t.lr_halving_period >= 1, "lr_halving_period must be positive")
    check(
        t.loss_kind in ("contrast-clean", "contrast-noisy", "current", "field"),
        f"unknown loss kind {t.loss_kind!r}",
    )
    check(t.snr_train in d.snr_list, "snr_train must be one of dataset.snr_list")

    k = c.classic
    check(k.outer_max >= 1 and k.max_inner >= 1, "BIM iteration counts must be positive")
    check(k.tol > 0 and k.lipschitz_safety > 1, "ISTA needs tol > 0 and lipschitz_safety > 1")
    check(k.init in ("zero", "bp"), f"unknown BIM init {k.init!r}")

    e = c.eval
    check(all(x in d.snr_list for x in e.snr_test), "eval.snr_test entries must be in dataset.snr_list")
    check(len(e.image_range) == 2 and e.image_range[1] > e.image_range[0], "image_range needs lo < hi")

    p = c.report
    kinds = ("contrast-clean", "contrast-noisy", "current", "field")
    check(
        all(x in kinds for x in [*p.loss_kinds, *p.mismatch_kinds, *p.austria_kinds]),
        "report loss kinds must be known loss kinds",
    )
    check(p.austria_snr in d.snr_list, "report.austria_snr must be one of dataset.snr_list")
    check(p.epochs >= 1, "report.epochs must be positive")
    check(
        p.generalization_kind in ("", "digit", "polygon", "austria", "disk"),
        f"unknown generalization kind {p.generalization_kind!r}",
    )

    r = c.runtime
    check(r.threads >= 1, "runtime.threads must be positive")

    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(problems))


def scene_from_config(s: mlc.ConfigDict) -> ScatteringScene:
    try:
        grid = make_grid(
            s.nx, s.ny, s.side_lambda * s.lambda0, s.side_lambda * s.lambda0, s.lambda0
        )
        return make_scene(grid, s.n_tx, s.n_rx, s.radius_lambda * s.lambda0)
    except InvalidArgumentError as e:
        raise ConfigError(f"invalid scene: {e}") from None


def to_json(c: mlc.ConfigDict) -> str:
    return json.dumps(c.to_dict(), indent=2, sort_keys=True) + "\n"


seed = mlc.FieldReference(1234, field_type=int)
snr_list = mlc.FieldReference([20.0, 5.0], field_type=list)

config = mlc.ConfigDict(
    {
        "scene": {
            "nx": 32,
            "ny": 32,
            "side_lambda": 2.0,
            "lambda0": 0.075,
            "n_tx": 16,
            "n_rx": 16,
            "radius_lambda": 4.0,
            "solver": "dense",
            "solver_tol": 1e-10,
            "max_iter": 2000,
        },
        "dataset": {
            "kind": "digit",
            "n_train": 200,
            "n_val": 20,
            "n_test": 100,
            "eps_range": [1.0, 5.0],
            "seed": seed,
            "snr_list": snr_list,
            # Empty selects procedural stroke glyphs
            "idx_path": "",
            "glyph_size": 28,
        },
        "net": {
            "depth": 2,
            "base_channels": 8,
            "use_batchnorm": True,
            "residual": True,
            "rng_seed": seed,
            "bn_eps": 1e-5,
            "bn_momentum": 0.1,
        },
        "train": {
            "lr0": 1e-3,
            "momentum": 0.99,
            "epochs": 60,
            "lr_halving_period": 20,
            "batch_size": 8,
            "loss_kind": "contrast-clean",
            "snr_train": 20.0,
            "seed": seed,
        },
        "classic": {
            "outer_max": 10,
            "max_inner": 200,
            "tol": 1e-6,
            "beta_rel": 0.01,
            "lipschitz_safety": 1.05,
            "init": "zero",
        },
        "eval": {
            "snr_test": [20.0, 5.0],
            # BIM baselines are run on the first n_bim test samples
            "n_bim": 10,
            "n_panels": 4,
            "image_range": [0.0, 4.0],
        },
        "report": {
            "loss_kinds": ["contrast-clean", "contrast-noisy", "current", "field"],
            "mismatch_kinds": ["contrast-noisy", "field"],
            "austria_kinds": ["current", "field"],
            "austria_eps": [1.1, 1.2, 2.0, 3.0, 5.0],
            "austria_snr": 20.0,
            # Second phantom kind the table is evaluated on; empty disables it
            "generalization_kind": "polygon",
            "epochs": 60,
        },
        "runtime": {
            "threads": 1,
            "deterministic": True,
        },
    }
)
