"""Acceptance criteria, one verdict line per criterion.

Run with ``pytest tests/test_acceptance.py -v``. Each criterion prints a
``[ACCEPT n] PASS|FAIL`` line through the terminal reporter, so the verdicts
show even with output capture on. The desk-profile pipeline (criteria 4 to 6)
runs once per module and takes several minutes on one core.
"""

import itertools
import json
import time

import numpy as np
import pytest
from scipy.stats import chisquare
from threadpoolctl import threadpool_limits

from breathga import cli, dsp, ga, pipeline, transfer
from breathga import synthgen as sg
from breathga.config import build_config
from breathga.ga import Chromosome, Individual
from breathga.nn import (conv1d, dense, flatten, init_model, kernels, maxpool1d, shape_chain,
                         softmax, softmax_output, train)
from breathga.nn import TrainConfig
from conftest import brute_conv, brute_moving_average, numeric_grads, rel_error

pytestmark = pytest.mark.slow

TARGET_CHROMOSOME = "7,5,1,8"


def verdict(request, number, title, ok, detail=""):
    line = f"[ACCEPT {number}] {'PASS' if ok else 'FAIL'}  {title}"
    if detail:
        line += f"  ({detail})"
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_line("")
        reporter.write_line(line)
    else:
        print(line)
    assert ok, line


# -- 1. numerics ------------------------------------------------------------

def _fd_checks():
    """Worst relative error over 20 seeds, with and without a frozen middle."""
    worst = 0.0
    stacks = [
        ([conv1d(3, 4), maxpool1d(2), conv1d(2, 3), maxpool1d(2), flatten(), dense(5),
          softmax_output(3)], (16, 2)),
        ([conv1d(2, 3), conv1d(3, 2, trainable=False), maxpool1d(2), flatten(),
          dense(4, trainable=False), softmax_output(3)], (10, 2)),
    ]
    for seed in range(20):
        for specs, shape in stacks:
            rng = np.random.default_rng(seed)
            model = init_model(specs, shape, seed)
            for p in model.params:
                if p is not None:
                    p["b"][:] = rng.normal(scale=0.1, size=p["b"].shape)
            x = rng.normal(size=(4,) + shape)
            y = rng.integers(0, 3, size=4)
            model.forward(x, keep=True)
            analytic = model.backward(y)
            numeric = numeric_grads(model, x, y)
            for a, n, spec in zip(analytic, numeric, model.specs):
                if n is None or not spec.trainable:
                    continue
                for key in ("w", "b"):
                    worst = max(worst, rel_error(a[key], n[key]))
    return worst


def _oracle_checks():
    rng = np.random.default_rng(77)
    errs = {}
    softmax_err = 0.0
    for _ in range(200):
        z = rng.normal(scale=rng.uniform(0.1, 300), size=(3, int(rng.integers(2, 50))))
        softmax_err = max(softmax_err, np.abs(softmax(z).sum(axis=-1) - 1).max())
    errs["softmax"] = softmax_err

    conv_err = 0.0
    for length in (1, 37, 1000, 10_000):
        taps = int(rng.integers(1, 9))
        x = rng.normal(size=(1, length, 2))
        w = rng.normal(size=(2, taps, 2))
        b = rng.normal(size=2)
        ref = brute_conv(x, w, b)
        for impl in kernels.backends().values():
            conv_err = max(conv_err, np.abs(impl.conv1d_forward(x, w, b) - ref).max())
    errs["conv"] = conv_err

    pool_err = 0.0
    for length in (2, 99, 10_000):
        x = rng.normal(size=(2, length, 3))
        ref = np.array([[[x[i, 2 * l:2 * l + 2, c].max() for c in range(3)]
                         for l in range(length // 2)] for i in range(2)]).reshape(2, length // 2, 3)
        for impl in kernels.backends().values():
            pool_err = max(pool_err, np.abs(impl.maxpool_forward(x, 2)[0] - ref).max())
    errs["pool"] = pool_err

    ma_err = 0.0
    for length in (1, 50, 10_000):
        x = rng.normal(size=length)
        window = int(rng.integers(1, min(length, 200) + 1))
        ma_err = max(ma_err, np.abs(dsp.moving_average(x, window) - brute_moving_average(x, window)).max())
    errs["moving_average"] = ma_err

    detrend_err = 0.0
    for length in (20, 3000, 10_000):
        t = np.linspace(-1, 1, length)
        x = rng.normal(size=length) + 3 * t ** 2 - t
        v = np.vander(t, 6, increasing=True)
        ref = x - v @ np.linalg.solve(v.T @ v, v.T @ x)
        detrend_err = max(detrend_err, np.abs(dsp.poly_detrend(x, 5) - ref).max())
    errs["detrend"] = detrend_err
    return errs


def test_criterion_1_numerics(request):
    start = time.perf_counter()
    worst = _fd_checks()
    errs = _oracle_checks()
    elapsed = time.perf_counter() - start
    # "exact" oracle agreement is judged at floating-point rounding level
    ok = (worst < 1e-6 and errs["softmax"] < 1e-9 and errs["conv"] < 1e-10 and errs["pool"] == 0
          and errs["moving_average"] < 1e-12 and errs["detrend"] < 1e-9 and elapsed < 60)
    detail = f"fd rel err {worst:.1e}, " + ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    verdict(request, 1, "numerics suite", ok, f"{detail}, {elapsed:.1f}s")


# -- 2. shape chains --------------------------------------------------------

def test_criterion_2_shape_chain(request):
    chain = shape_chain(transfer.base_specs(), (3000, 1))
    expected = [(3000, 256), (1500, 256), (1500, 128), (750, 128), (750, 64), (375, 64),
                (24000,), (64,), (8,)]
    base = init_model(transfer.base_specs(), (3000, 1), 0)
    extended = transfer.extend(transfer.trim(base), ga.decode(Chromosome.parse(TARGET_CHROMOSOME)), 0)
    flat = [s for spec, s in zip(extended.specs, extended.shapes) if spec.kind == "flatten"][0]
    ok = chain == expected and chain[3] == (750, 128) and flat == (48000,)
    verdict(request, 2, "shape chains", ok, f"base {chain[3]}->{chain[6]}->{chain[8]}, extended flatten {flat}")


# -- 3. freeze / transfer ---------------------------------------------------

def test_criterion_3_freeze(request):
    cfg = build_config({"profile": "desk"})
    records = sg.generate_dataset(pipeline.gen_config(cfg))
    records = [dsp.preprocess(r, cfg.ma_window, cfg.detrend_degree) for r in records]
    subset = dsp.stratified_subset(records, 100, 0)
    x, y = sg.records_to_arrays(subset)
    base = init_model(transfer.base_specs(cfg.base_filters, cfg.base_lengths, cfg.base_dense),
                      (cfg.n_samples, 1), 0)
    before = [{k: v.copy() for k, v in p.items()} if p else None for p in base.params]
    trimmed = transfer.trim(base)
    model = transfer.extend(trimmed, ga.decode(Chromosome.parse(TARGET_CHROMOSOME)), 1)
    head_before = model.params[4]["w"].copy()
    with threadpool_limits(1):
        train(model, x, y, TrainConfig(epochs=1, batch_size=50))
    frozen_same = all(
        model.params[i][k].tobytes() == before[i][k].tobytes()
        for i in range(transfer.TRIM_DEPTH) if before[i] for k in ("w", "b"))
    head_moved = not np.array_equal(model.params[4]["w"], head_before)
    acts = base.forward(x, upto=transfer.TRIM_DEPTH)
    prefix_equal = np.array_equal(trimmed.forward(x), acts)
    ok = len(subset) == 100 and frozen_same and prefix_equal and head_moved
    verdict(request, 3, "freeze/transfer", ok,
            f"frozen bitwise {frozen_same}, prefix equal {prefix_equal}, head trained {head_moved}")


# -- desk-profile pipeline (criteria 4 to 6) --------------------------------

@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    cfg = build_config({"profile": "desk"})
    final_cfg = build_config({"profile": "desk", "chromosome": TARGET_CHROMOSOME})
    timings = {}
    with threadpool_limits(1):
        pipeline.gen_data(cfg, out)
        start = time.perf_counter()
        pretrained = pipeline.pretrain(cfg, out)
        timings["pretrain"] = time.perf_counter() - start
        start = time.perf_counter()
        logs, best = pipeline.evolve(cfg, out)
        timings["evolve"] = time.perf_counter() - start
        final = pipeline.train_final(final_cfg, out)
        scores = {}
        for mode in ("transfer", "scratch"):
            acc, confusion = pipeline.evaluate_cmd(cfg, out, out / f"final_model_{mode}.rnn")
            scores[mode] = (acc, confusion)
    return {"out": out, "cfg": cfg, "pretrained": pretrained, "logs": logs, "best": best,
            "final": final, "scores": scores, "timings": timings}


def _operator_suite():
    rng = np.random.default_rng(2024)
    problems = []
    draws = np.array([ga.random_chromosome(rng).genes for _ in range(5000)])
    for col, (lo, hi) in enumerate(ga.GENE_RANGES):
        if set(draws[:, col]) != set(range(lo, hi + 1)):
            problems.append(f"gene {col + 1} range")
    if ga.splice(Chromosome(3, 4, 2, 8), Chromosome(8, 2, 3, 5), 2) != (Chromosome(3, 4, 3, 5),
                                                                      Chromosome(8, 2, 2, 8)):
        problems.append("splice")
    for _ in range(2000):
        c = ga.random_chromosome(rng)
        if sum(a != b for a, b in zip(c.genes, ga.mutate(c, rng).genes)) != 1:
            problems.append("mutation")
            break
    grid = [Chromosome(*g) for g in itertools.product(range(3, 9), range(2, 7), range(1, 4), range(4, 10))]
    for _ in range(200):
        picks = rng.choice(len(grid), size=14, replace=False)
        pool = [Individual(grid[i], f) for i, f in zip(picks, rng.uniform(size=14))]
        pool[9] = Individual(pool[2].chromosome, pool[2].fitness)
        out = ga.survivors(pool, rng)
        top = {ind.chromosome for ind in sorted(pool, key=lambda i: -i.fitness)[:2]}
        names = {ind.chromosome for ind in out}
        if not top <= names:
            problems.append("elitism")
            break
        if len(out) != 8 or len(names) != 8:
            problems.append("distinctness")
            break
    pop = [Individual(Chromosome(3 + i % 6, 2, 1, 4 + i // 6), 0.4) for i in range(8)]
    index = {ind.chromosome: i for i, ind in enumerate(pop)}
    counts = np.zeros(8)
    for _ in range(100_000):
        for ind in ga.select_parents(pop, "roulette", rng):
            counts[index[ind.chromosome]] += 1
    p = chisquare(counts).pvalue
    if p <= 0.01:
        problems.append(f"roulette chi-square p={p:.3g}")
    return problems, p


def test_criterion_4_ga(request, desk):
    start = time.perf_counter()
    problems, p = _operator_suite()
    operators = time.perf_counter() - start
    maxes = [e.max_fitness for e in desk["logs"]]
    monotone = all(b >= a for a, b in zip(maxes, maxes[1:]))
    gens = len(desk["logs"]) - 1
    total = operators + desk["timings"]["evolve"]
    ok = not problems and monotone and gens == 20 and total < 30 * 60
    detail = (f"operators {'ok' if not problems else problems}, chi-square p={p:.3f}, {gens} generations, "
              f"max fitness {maxes[0]:.3f}->{maxes[-1]:.3f} best {desk['best'].chromosome}, "
              f"{total:.0f}s")
    verdict(request, 4, "GA operators and desk evolution", ok, detail)


def test_criterion_5_learning_target(request, desk):
    acc, confusion = desk["scores"]["transfer"]
    apnea = confusion[1, 1] / confusion[1].sum()
    scratch_acc = desk["scores"]["scratch"][0]
    ok = acc >= 0.80 and apnea >= 0.95
    detail = (f"transfer test acc {acc:.4f} (scratch {scratch_acc:.4f}), apnea recall {apnea:.3f}, "
              f"n_test {int(confusion.sum())}, base test acc {desk['pretrained'].test_accuracy:.4f}")
    verdict(request, 5, "desk learning target >= 80% and apnea recall >= 95%", ok, detail)


def test_criterion_6_transfer_parity(request, desk):
    final = desk["final"]
    acc_t, acc_s = final["transfer"][1][-1], final["scratch"][1][-1]
    sec_t, sec_s = final["transfer"][2], final["scratch"][2]
    gap = abs(acc_t - acc_s)
    ok = gap <= 0.05 and sec_t < sec_s
    detail = (f"transfer {acc_t:.4f} vs scratch {acc_s:.4f} (gap {100 * gap:.1f} points), "
              f"{sec_t:.2f} vs {sec_s:.2f} s/epoch")
    verdict(request, 6, "transfer vs scratch parity and speed", ok, detail)


# -- 7. reproducibility -----------------------------------------------------

TINY = {"fs_hz": 10, "records_per_class": 3, "ma_window": 3, "base_filters": [4, 4, 4],
        "base_lengths": [4, 4, 4], "base_dense": 8, "pretrain_epochs": 2, "final_epochs": 2,
        "batch_size": 8, "subset_size": 24, "generations": 3}


def _all_commands(root, name):
    cfg = root / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    out = root / name
    codes = [cli.main([command, "--config", str(cfg), "--out", str(out), "--threads", "1",
                       "--seed", "5", "-q"])
             for command in ("gen-data", "pretrain", "evolve", "train-final", "evaluate", "report")]
    return out, codes


def _desk_commands(root, name):
    # desk scale for the data and base model, with a short pretrain to bound runtime
    cfg = root / "desk.json"
    cfg.write_text(json.dumps({"profile": "desk", "pretrain_epochs": 2}))
    out = root / name
    codes = [cli.main([command, "--config", str(cfg), "--out", str(out), "--threads", "1",
                       "--seed", "5", "-q"] + extra)
             for command, extra in (("gen-data", ["--csv"]), ("pretrain", []))]
    return out, codes


def test_criterion_7_reproducibility(request, tmp_path):
    runs = [_all_commands(tmp_path, "tiny_a"), _all_commands(tmp_path, "tiny_b")]
    runs += [_desk_commands(tmp_path, "desk_a"), _desk_commands(tmp_path, "desk_b")]
    codes_ok = all(c == 0 for _, codes in runs for c in codes)
    mismatched = []
    compared = 0
    for (a, _), (b, _) in ((runs[0], runs[1]), (runs[2], runs[3])):
        names = sorted(p.name for p in a.iterdir())
        if names != sorted(p.name for p in b.iterdir()):
            mismatched.append(f"{a.name}: file sets differ")
        for n in names:
            compared += 1
            if (a / n).read_bytes() != (b / n).read_bytes():
                mismatched.append(n)
    ok = codes_ok and not mismatched and compared > 0
    verdict(request, 7, "byte-identical artifacts with --threads 1", ok,
            f"{compared} artifacts compared across all six commands, mismatches {mismatched or 'none'}")
