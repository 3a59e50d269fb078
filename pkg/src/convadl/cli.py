"""Command-line entry point.

Subcommands: train, eval, predict, gridsearch, bench, gen-synth.
Runs are described by a flat ``key = value`` config file (``#`` starts a
comment); command-line flags override file values.  Exit codes: 0
success, 2 configuration error, 3 data error, 4 numerical error.
"""

import argparse
import itertools
import sys
import time
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image, UnidentifiedImageError

from .dataio import MODE_FEATURE, MODE_IMAGE, Dataset, load_feature_file, \
    load_image_dir, split
from .errors import ConfigError, DataError, NumericalError
from .inference import classify, evaluate
from .model import Hyperparams, one_hot_encode
from .optimizer import train
from .patching import ConvGeometry, build_patch_matrix
from .persistence import load_model, save_model
from .presets import get_preset
from .synth import make_stripes_dataset, write_image_dataset

_INT_KEYS = {"input_rows", "input_cols", "atom_rows", "atom_cols",
             "stride_rows", "stride_cols", "m", "max_iter", "seed", "folds",
             "grid_cap", "repetitions"}
_LIST_KEYS = {"lambda1", "lambda2", "lambda3", "lambda4", "rho"}
_FLOAT_KEYS = {"tol", "train_per_class"}
_BOOL_KEYS = {"threshold_at_test"}
_STR_KEYS = {"data", "data_mode", "model_out", "trace_out", "preset"}
_ALL_KEYS = _INT_KEYS | _LIST_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS


@dataclass
class RunConfig:
    """Validated settings for one command invocation."""

    data: str = None
    data_mode: str = MODE_IMAGE
    input_rows: int = None
    input_cols: int = None
    atom_rows: int = None
    atom_cols: int = None
    stride_rows: int = None
    stride_cols: int = None
    m: int = None
    lambda1: tuple = (0.001,)
    lambda2: tuple = (0.2,)
    lambda3: tuple = (0.1,)
    lambda4: tuple = (0.1,)
    rho: tuple = (0.1,)
    max_iter: int = 50
    tol: float = 1e-6
    seed: int = 0
    train_per_class: float = None
    threshold_at_test: bool = False
    model_out: str = "model.dcadl"
    trace_out: str = None
    folds: int = 10
    grid_cap: int = 256
    repetitions: int = 3

    def hyperparams(self):
        """Single-point hyperparameters; rejects unexpanded grid lists."""
        for name in sorted(_LIST_KEYS):
            values = getattr(self, name)
            if len(values) != 1:
                raise ConfigError(
                    f"{name} has {len(values)} values; only gridsearch accepts lists"
                )
        try:
            return Hyperparams(
                lambda1=self.lambda1[0], lambda2=self.lambda2[0],
                lambda3=self.lambda3[0], lambda4=self.lambda4[0],
                rho=self.rho[0], max_iter=self.max_iter, tol=self.tol,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def geometry(self):
        required = ("input_rows", "input_cols", "atom_rows", "atom_cols",
                    "stride_rows", "stride_cols")
        missing = [k for k in required if getattr(self, k) is None]
        if missing:
            raise ConfigError(f"geometry fields missing: {', '.join(missing)}")
        try:
            return ConvGeometry(self.input_rows, self.input_cols,
                                self.atom_rows, self.atom_cols,
                                self.stride_rows, self.stride_cols)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def validate_params(self):
        """Reject parameter settings that would break a training
        precondition; runs before any data is touched (geometry may still
        be partly unknown for feature files, and is checked separately)."""
        if self.data is None:
            raise ConfigError("no dataset given (config key 'data' or --data)")
        if self.data_mode not in (MODE_IMAGE, MODE_FEATURE):
            raise ConfigError(
                f"data_mode must be '{MODE_IMAGE}' or '{MODE_FEATURE}', "
                f"got {self.data_mode!r}"
            )
        if self.m is None or self.m < 1:
            raise ConfigError(f"dictionary size m must be >= 1, got {self.m}")
        if self.max_iter < 0:
            raise ConfigError(f"max_iter must be >= 0, got {self.max_iter}")
        for name in sorted(_LIST_KEYS):
            values = getattr(self, name)
            if len(values) == 0:
                raise ConfigError(f"{name} needs at least one value")
            for v in values:
                if not np.isfinite(v) or v < 0:
                    raise ConfigError(f"{name} values must be nonnegative reals")
        for name in ("lambda3", "lambda4", "rho"):
            for v in getattr(self, name):
                if v <= 0:
                    raise ConfigError(f"{name} values must be > 0")
        if self.tol <= 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if self.train_per_class is not None and self.train_per_class <= 0:
            raise ConfigError(
                f"train_per_class must be positive, got {self.train_per_class}"
            )
        if self.data_mode == MODE_IMAGE:
            self.geometry()


def parse_config_file(path):
    """Read a flat key = value file; '#' starts a comment."""
    raw = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(
                f"{path}:{lineno}: expected key = value, got {line.strip()!r}"
            )
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        raw[key] = value
    return raw


def _coerce(key, value):
    if isinstance(value, str):
        value = value.strip()
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _BOOL_KEYS:
            if isinstance(value, bool):
                return value
            if value.lower() in ("true", "1", "yes", "on"):
                return True
            if value.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"expected a boolean, got {value!r}")
        if key in _LIST_KEYS:
            if isinstance(value, (tuple, list)):
                return tuple(float(v) for v in value)
            parts = [p for p in str(value).split(",") if p.strip() != ""]
            if not parts:
                raise ValueError("empty value list")
            return tuple(float(p) for p in parts)
        return str(value)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def build_config(args):
    """Merge preset, config file, and command-line overrides (that order)."""
    config = RunConfig()

    preset_name = None
    file_values = {}
    if getattr(args, "config", None):
        file_values = parse_config_file(args.config)
        preset_name = file_values.pop("preset", None)
    if getattr(args, "preset_flag", None):
        preset_name = args.preset_flag

    if preset_name:
        try:
            preset = get_preset(preset_name)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        g, hp = preset.geom, preset.hyperparams
        config = replace(
            config, data_mode=preset.mode, m=preset.m,
            input_rows=g.input_rows, input_cols=g.input_cols,
            atom_rows=g.atom_rows, atom_cols=g.atom_cols,
            stride_rows=g.stride_rows, stride_cols=g.stride_cols,
            lambda1=(hp.lambda1,), lambda2=(hp.lambda2,),
            lambda3=(hp.lambda3,), lambda4=(hp.lambda4,),
            rho=(hp.rho,), max_iter=hp.max_iter, tol=hp.tol,
        )

    for key, value in file_values.items():
        config = replace(config, **{key: _coerce(key, value)})

    # Flag overrides; --stride sets both stride axes.
    overrides = {}
    for key in sorted(_ALL_KEYS - {"preset"}):
        flag = getattr(args, key, None)
        if flag is not None:
            overrides[key] = _coerce(key, flag)
    stride = getattr(args, "stride", None)
    if stride is not None:
        overrides["stride_rows"] = int(stride)
        overrides["stride_cols"] = int(stride)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = int(args.seed)
    if getattr(args, "out", None) is not None:
        overrides["model_out"] = str(args.out)
    if getattr(args, "threshold_at_test", False):
        overrides["threshold_at_test"] = True
    if overrides:
        config = replace(config, **overrides)
    return config


def load_training_dataset(config):
    """Load the configured dataset, filling feature-mode geometry from the file."""
    if config.data_mode == MODE_FEATURE:
        ds = load_feature_file(config.data)
        d = ds.sample_shape[0]
        if config.input_rows is None:
            config.input_rows = d
        elif config.input_rows != d:
            raise DataError(
                f"feature file has dimension {d} but config expects "
                f"{config.input_rows}"
            )
        config.input_cols = 1
        if config.atom_cols is None:
            config.atom_cols = 1
        if config.stride_cols is None:
            config.stride_cols = 1
        config.geometry()
        return ds
    return load_image_dir(config.data, config.input_rows, config.input_cols)


def load_eval_dataset(config, geom):
    """Load a dataset whose sample shape must match a trained model."""
    if config.data is None:
        raise ConfigError("no dataset given (config key 'data' or --data)")
    if config.data_mode == MODE_FEATURE:
        ds = load_feature_file(config.data)
    else:
        ds = load_image_dir(config.data, geom.input_rows, geom.input_cols)
    if ds.sample_shape != (geom.input_rows, geom.input_cols):
        raise DataError(
            f"dataset samples are {ds.sample_shape} but the model expects "
            f"({geom.input_rows}, {geom.input_cols})"
        )
    return ds


def _emit(pairs, machine):
    lines = []
    for key, value in pairs:
        if machine:
            lines.append(f"{key}={value}")
        else:
            lines.append(f"{key:<22} {value}")
    print("\n".join(lines))


def _train_once(config, ds, hp, seed):
    geom = config.geometry()
    if ds.sample_shape != (geom.input_rows, geom.input_cols):
        raise DataError(
            f"dataset samples are {ds.sample_shape} but geometry expects "
            f"({geom.input_rows}, {geom.input_cols})"
        )
    names = ds.class_names
    if len(names) < 2:
        raise DataError(f"training needs at least 2 classes, got {len(names)}")
    xbar = build_patch_matrix(ds.samples, geom)
    y = one_hot_encode(ds.labels, names)
    return train(xbar, y, geom, config.m, hp, seed=seed, class_names=names)


def cmd_train(args):
    config = build_config(args)
    config.validate_params()
    hp = config.hyperparams()
    ds = load_training_dataset(config)
    if config.train_per_class is not None:
        ds, _ = split(ds, config.train_per_class, config.seed)

    state = _train_once(config, ds, hp, config.seed)
    save_model(state.dictionary, state.classifier, hp, config.model_out)

    trace_path = config.trace_out or config.model_out + ".trace.csv"
    with open(trace_path, "w", encoding="utf-8") as fh:
        fh.write("iteration,objective\n")
        for i, value in enumerate(state.objective_trace):
            fh.write(f"{i},{value!r}\n")

    _emit([
        ("model", config.model_out),
        ("trace_csv", trace_path),
        ("samples", ds.n),
        ("classes", len(ds.class_names)),
        ("iterations", state.iteration),
        ("converged", state.converged),
        ("final_objective", f"{state.objective_trace[-1]:.10g}"),
        ("wall_time_s", f"{state.wall_time:.4f}"),
    ], args.machine_readable)
    return 0


def cmd_eval(args):
    config = build_config(args)
    if args.model is None:
        raise ConfigError("--model is required for eval")
    dictionary, classifier, hp = load_model(args.model)
    if dictionary.geom.is_feature_mode:
        config.data_mode = MODE_FEATURE
    ds = load_eval_dataset(config, dictionary.geom)
    if config.train_per_class is not None:
        _, ds = split(ds, config.train_per_class, config.seed)
    report = evaluate(ds.samples, ds.labels, dictionary, classifier,
                      lambda1=hp.lambda1,
                      apply_threshold=config.threshold_at_test)
    _emit([
        ("accuracy", f"{report.accuracy:.4f}"),
        ("n", report.n),
        ("correct", report.correct),
        ("mean_test_time_s", f"{report.mean_time_per_sample:.2e}"),
        ("total_time_s", f"{report.total_time:.4f}"),
    ], args.machine_readable)
    return 0


def _load_single_sample(config, args):
    if config.data_mode == MODE_FEATURE:
        ds = load_feature_file(args.input)
        if not 0 <= args.index < ds.n:
            raise DataError(
                f"record index {args.index} out of range for {ds.n} records"
            )
        return ds.samples[args.index]
    try:
        with Image.open(args.input) as img:
            if img.mode != "L":
                raise DataError(
                    f"{args.input}: expected 8-bit grayscale, got mode {img.mode!r}"
                )
            return np.asarray(img, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"{args.input}: unreadable image ({exc})") from exc


def cmd_predict(args):
    config = build_config(args)
    if args.model is None:
        raise ConfigError("--model is required for predict")
    dictionary, classifier, hp = load_model(args.model)
    geom = dictionary.geom
    if geom.is_feature_mode:
        config.data_mode = MODE_FEATURE
    sample = _load_single_sample(config, args)
    if sample.shape != (geom.input_rows, geom.input_cols):
        raise DataError(
            f"sample is {sample.shape} but the model expects "
            f"({geom.input_rows}, {geom.input_cols})"
        )
    pred = classify(sample, dictionary, classifier, lambda1=hp.lambda1,
                    apply_threshold=config.threshold_at_test)
    if args.machine_readable:
        pairs = [("class", pred.class_name), ("class_index", pred.class_index)]
        pairs += [(f"score_{name}", f"{s:.10g}")
                  for name, s in zip(classifier.class_names, pred.scores)]
        _emit(pairs, True)
    else:
        print(pred.class_name)
    return 0


def _stratified_folds(ds, folds, seed):
    """Per-class shuffled round-robin fold assignment."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(ds.n, dtype=int)
    by_class = {}
    for idx, label in enumerate(ds.labels):
        by_class.setdefault(label, []).append(idx)
    for label in sorted(by_class):
        members = by_class[label]
        if len(members) < folds:
            raise DataError(
                f"class {label!r} has {len(members)} samples; cannot form "
                f"{folds} folds"
            )
        order = rng.permutation(len(members))
        for rank, member_pos in enumerate(order):
            assignment[members[member_pos]] = rank % folds
    return assignment


def _subset(ds, mask):
    idxs = np.flatnonzero(mask)
    return Dataset(tuple(ds.samples[i] for i in idxs),
                   tuple(ds.labels[i] for i in idxs), ds.mode)


def cmd_gridsearch(args):
    config = build_config(args)
    config.validate_params()
    if config.folds < 2:
        raise ConfigError(f"folds must be >= 2, got {config.folds}")
    grid_axes = [getattr(config, name) for name in
                 ("lambda1", "lambda2", "lambda3", "lambda4", "rho")]
    cells = list(itertools.product(*grid_axes))
    if len(cells) > config.grid_cap:
        raise ConfigError(
            f"grid has {len(cells)} cells, above the cap of {config.grid_cap}; "
            "raise grid_cap to allow this"
        )
    ds = load_training_dataset(config)
    if config.train_per_class is not None:
        ds, _ = split(ds, config.train_per_class, config.seed)
    assignment = _stratified_folds(ds, config.folds, config.seed)

    results = []
    for cell in cells:
        lam1, lam2, lam3, lam4, rho = cell
        hp = Hyperparams(lambda1=lam1, lambda2=lam2, lambda3=lam3,
                         lambda4=lam4, rho=rho, max_iter=config.max_iter,
                         tol=config.tol)
        accs = []
        for fold in range(config.folds):
            held_out = assignment == fold
            state = _train_once(config, _subset(ds, ~held_out), hp, config.seed)
            test_ds = _subset(ds, held_out)
            report = evaluate(test_ds.samples, test_ds.labels,
                              state.dictionary, state.classifier,
                              lambda1=hp.lambda1,
                              apply_threshold=config.threshold_at_test)
            accs.append(report.accuracy)
        results.append(float(np.mean(accs)))

    best = int(np.argmax(results))  # ties break to the first cell in grid order
    if args.machine_readable:
        pairs = [("cells", len(cells)), ("folds", config.folds)]
        for i, (cell, acc) in enumerate(zip(cells, results)):
            pairs.append((f"cell_{i}_params", ":".join(f"{v:g}" for v in cell)))
            pairs.append((f"cell_{i}_accuracy", f"{acc:.4f}"))
        pairs += [
            ("best_index", best),
            ("best_lambda1", f"{cells[best][0]:g}"),
            ("best_lambda2", f"{cells[best][1]:g}"),
            ("best_lambda3", f"{cells[best][2]:g}"),
            ("best_lambda4", f"{cells[best][3]:g}"),
            ("best_rho", f"{cells[best][4]:g}"),
            ("best_accuracy", f"{results[best]:.4f}"),
        ]
        _emit(pairs, True)
    else:
        print(f"{'lambda1':>10} {'lambda2':>10} {'lambda3':>10} "
              f"{'lambda4':>10} {'rho':>8} {'accuracy':>9}")
        for i, (cell, acc) in enumerate(zip(cells, results)):
            marker = " *" if i == best else ""
            print(f"{cell[0]:>10g} {cell[1]:>10g} {cell[2]:>10g} "
                  f"{cell[3]:>10g} {cell[4]:>8g} {acc:>9.4f}{marker}")
        print(f"best: cell {best} with mean accuracy {results[best]:.4f}")
    return 0


def cmd_bench(args):
    config = build_config(args)
    config.validate_params()
    if config.repetitions < 3:
        raise ConfigError(
            f"bench needs at least 3 repetitions, got {config.repetitions}"
        )
    hp = config.hyperparams()
    ds = load_training_dataset(config)

    train_times, test_times = [], []
    for rep in range(config.repetitions):
        rep_seed = config.seed + rep
        if config.train_per_class is not None:
            train_ds, test_ds = split(ds, config.train_per_class, rep_seed)
        else:
            train_ds = test_ds = ds
        start = time.perf_counter()
        state = _train_once(config, train_ds, hp, rep_seed)
        train_times.append(time.perf_counter() - start)
        report = evaluate(test_ds.samples, test_ds.labels,
                          state.dictionary, state.classifier,
                          lambda1=hp.lambda1,
                          apply_threshold=config.threshold_at_test)
        test_times.append(report.mean_time_per_sample)

    def agg(values):
        return min(values), float(np.mean(values)), max(values)

    tr = agg(train_times)
    te = agg(test_times)
    _emit([
        ("repetitions", config.repetitions),
        ("train_time_min_s", f"{tr[0]:.4f}"),
        ("train_time_mean_s", f"{tr[1]:.4f}"),
        ("train_time_max_s", f"{tr[2]:.4f}"),
        ("test_time_min_s", f"{te[0]:.2e}"),
        ("test_time_mean_s", f"{te[1]:.2e}"),
        ("test_time_max_s", f"{te[2]:.2e}"),
    ], args.machine_readable)
    return 0


def cmd_gen_synth(args):
    if args.out is None:
        raise ConfigError("--out directory is required for gen-synth")
    try:
        ds = make_stripes_dataset(rows=args.rows, cols=args.cols,
                                  per_class=args.per_class, noise=args.noise,
                                  seed=args.seed, stripe_width=args.stripe_width)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    root = write_image_dataset(ds, args.out)
    _emit([
        ("out", str(root)),
        ("samples", ds.n),
        ("classes", ",".join(ds.class_names)),
        ("rows", args.rows),
        ("cols", args.cols),
        ("noise", args.noise),
    ], args.machine_readable)
    return 0


def _add_common_flags(sub):
    sub.add_argument("--config", help="path to a key = value config file")
    sub.add_argument("--seed", type=int, help="random seed")
    sub.add_argument("--out", help="output path (model file or directory)")
    sub.add_argument("--machine-readable", action="store_true",
                     help="emit one key=value per line")
    sub.add_argument("--preset", dest="preset_flag", metavar="NAME",
                     help="named configuration preset")
    sub.add_argument("--data",
                     help="dataset directory (image mode) or file (feature mode)")
    sub.add_argument("--data-mode", dest="data_mode",
                     choices=(MODE_IMAGE, MODE_FEATURE))
    sub.add_argument("--m", type=int, help="dictionary size (atom count)")
    for i in (1, 2, 3, 4):
        sub.add_argument(f"--lambda{i}", help="value, or comma list for gridsearch")
    sub.add_argument("--rho", help="learning rate, or comma list for gridsearch")
    sub.add_argument("--max-iter", dest="max_iter", type=int)
    sub.add_argument("--tol", type=float)
    sub.add_argument("--input-rows", dest="input_rows", type=int)
    sub.add_argument("--input-cols", dest="input_cols", type=int)
    sub.add_argument("--atom-rows", dest="atom_rows", type=int)
    sub.add_argument("--atom-cols", dest="atom_cols", type=int)
    sub.add_argument("--stride", type=int, help="stride for both axes")
    sub.add_argument("--stride-rows", dest="stride_rows", type=int)
    sub.add_argument("--stride-cols", dest="stride_cols", type=int)
    sub.add_argument("--train-per-class", dest="train_per_class", type=float,
                     help="per-class training count (int) or fraction (0..1)")
    sub.add_argument("--threshold-at-test", dest="threshold_at_test",
                     action="store_true",
                     help="apply l1 shrinkage to codes at test time")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="convadl",
        description="Train and apply convolutional analysis dictionaries "
                    "with a jointly learned linear classifier.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p_train = commands.add_parser("train", help="train a model and save it")
    _add_common_flags(p_train)
    p_train.add_argument("--trace-out", dest="trace_out",
                         help="objective trace CSV path")
    p_train.set_defaults(func=cmd_train)

    p_eval = commands.add_parser("eval", help="accuracy/timing of a saved model")
    _add_common_flags(p_eval)
    p_eval.add_argument("--model", help="model file to evaluate")
    p_eval.set_defaults(func=cmd_eval)

    p_pred = commands.add_parser("predict", help="classify a single sample")
    _add_common_flags(p_pred)
    p_pred.add_argument("--model", help="model file")
    p_pred.add_argument("--input", required=True,
                        help="image file, or feature file with --index")
    p_pred.add_argument("--index", type=int, default=0,
                        help="record index within a feature file")
    p_pred.set_defaults(func=cmd_predict)

    p_grid = commands.add_parser("gridsearch",
                                 help="cross-validated hyperparameter grid")
    _add_common_flags(p_grid)
    p_grid.add_argument("--folds", type=int)
    p_grid.add_argument("--grid-cap", dest="grid_cap", type=int)
    p_grid.set_defaults(func=cmd_gridsearch)

    p_bench = commands.add_parser("bench", help="timed train/test repetitions")
    _add_common_flags(p_bench)
    p_bench.add_argument("--repetitions", type=int)
    p_bench.set_defaults(func=cmd_bench)

    p_gen = commands.add_parser("gen-synth",
                                help="generate a two-class stripe dataset")
    p_gen.add_argument("--out", help="output directory")
    p_gen.add_argument("--rows", type=int, default=16)
    p_gen.add_argument("--cols", type=int, default=16)
    p_gen.add_argument("--per-class", dest="per_class", type=int, default=100)
    p_gen.add_argument("--noise", type=float, default=0.1)
    p_gen.add_argument("--stripe-width", dest="stripe_width", type=int, default=2)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--machine-readable", action="store_true")
    p_gen.set_defaults(func=cmd_gen_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
