"""Pipeline stages backing the CLI commands. Each reads and writes artifacts
in an output directory so commands can run independently."""

import csv
import json
import logging
import time
from pathlib import Path

import numpy as np

from . import dsp, ga, synthgen, transfer
from .config import to_dict
from .nn import TrainConfig, evaluate, load_model, save_model
from .synthgen import CLASS_NAMES, N_CLASSES, records_to_arrays

log = logging.getLogger(__name__)

DATASET = "dataset.rspd"
BASE_MODEL = "base_model.rnn"
PRETRAIN_HISTORY = "pretrain_history.csv"
GA_LOG = "ga_log.csv"
BEST_CHROMOSOME = "best_chromosome.txt"
FINAL_CURVES = "final_curves.csv"
CONFUSION = "confusion.csv"
EVALUATION = "evaluation.json"
FITNESS_REPORT = "fitness_report.csv"
FINAL_CURVES_REPORT = "final_curves_report.csv"
REPORT_MA_WINDOW = 10


class MissingArtifactError(RuntimeError):
    """A command needs an artifact an earlier command should have produced."""


def _require(out, name, producer):
    path = Path(out) / name
    if not path.exists():
        raise MissingArtifactError(f"{path} not found; run `{producer}` first")
    return path


def gen_config(cfg):
    return synthgen.GenConfig(fs_hz=cfg.fs_hz, duration_s=cfg.duration_s,
                              records_per_class=cfg.records_per_class,
                              distances_m=cfg.distances_m, noise_std=cfg.noise_std,
                              trend_max_coeff=cfg.trend_max_coeff, seed=cfg.seed)


def train_config(cfg, epochs, seed_offset=0):
    return TrainConfig(epochs=epochs, batch_size=cfg.batch_size, step_size=cfg.step_size,
                       seed=cfg.seed + seed_offset)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def load_preprocessed(cfg, out):
    path = _require(out, DATASET, "gen-data")
    records, header = synthgen.read_dataset(path, with_header=True)
    if header["n_samples"] < cfg.ma_window:
        raise ValueError("dataset records are shorter than the moving-average window")
    return [dsp.preprocess(r, cfg.ma_window, cfg.detrend_degree) for r in records]


def final_split(cfg, records):
    return dsp.stratified_split(records, 0.8, cfg.seed)


# -- commands ---------------------------------------------------------------

def gen_data(cfg, out, csv_export=False):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    records = synthgen.generate_dataset(gen_config(cfg))
    synthgen.write_dataset(records, out / DATASET, cfg.fs_hz, cfg.duration_s)
    if csv_export:
        synthgen.export_csv(records, out / "dataset.csv")
    log.info("wrote %d records to %s", len(records), out / DATASET)
    return records


def pretrain(cfg, out):
    out = Path(out)
    records = load_preprocessed(cfg, out)
    specs = transfer.base_specs(cfg.base_filters, cfg.base_lengths, cfg.base_dense)

    def progress(epoch, loss, acc):
        log.info("pretrain epoch %d/%d loss %.4f acc %.4f", epoch + 1, cfg.pretrain_epochs, loss, acc)

    result = transfer.pretrain_base(records, train_config(cfg, cfg.pretrain_epochs), specs=specs,
                                    seed=cfg.seed, on_epoch=progress)
    save_model(result.model, out / BASE_MODEL)
    write_csv(out / PRETRAIN_HISTORY, ["epoch", "loss", "train_accuracy"],
              [(i + 1, loss, acc) for i, (loss, acc) in enumerate(result.history)])
    log.info("base model: train %d / test %d records, train acc %.4f, test acc %.4f",
             result.n_train, result.n_test, result.train_accuracy, result.test_accuracy)
    return result


def evolve(cfg, out):
    out = Path(out)
    base = load_model(_require(out, BASE_MODEL, "pretrain"))
    records = load_preprocessed(cfg, out)
    gcfg = ga.GAConfig(generations=cfg.generations, parent_strategy=cfg.parent_strategy,
                       subset_size=cfg.subset_size, crossover_prob=cfg.crossover_prob,
                       mutation_prob=cfg.mutation_prob, fitness_batch_size=cfg.batch_size,
                       step_size=cfg.step_size, seed=cfg.seed)

    def progress(entry):
        log.info("generation %d: max %.4f mean %.4f best %s", entry.generation,
                 entry.max_fitness, entry.mean_fitness, entry.best)

    logs, best = ga.run_ga(gcfg, transfer.trim(base), records, on_generation=progress)
    ga.write_log(logs, out / GA_LOG)
    (out / BEST_CHROMOSOME).write_text(f"{best.chromosome}\n{best.fitness!r}\n")
    log.info("best chromosome %s fitness %.4f", best.chromosome, best.fitness)
    return logs, best


def resolve_chromosome(cfg, out):
    if cfg.chromosome is not None:
        return ga.Chromosome.from_genes(cfg.chromosome)
    path = _require(out, BEST_CHROMOSOME, "evolve")
    return ga.Chromosome.parse(path.read_text().splitlines()[0])


def train_final(cfg, out):
    """Train the chosen head on the full (unaugmented) dataset in one or both modes.

    Returns {mode: (history, test_curve, seconds_per_epoch, model)}.
    """
    out = Path(out)
    chromosome = resolve_chromosome(cfg, out)
    arch = ga.decode(chromosome)
    records = load_preprocessed(cfg, out)
    train_set, test_set = final_split(cfg, records)
    modes = ["scratch", "transfer"] if cfg.mode == "both" else [cfg.mode]
    trimmed = None
    if "transfer" in modes:
        trimmed = transfer.trim(load_model(_require(out, BASE_MODEL, "pretrain")))
    results = {}
    for mode in modes:
        if mode == "transfer":
            model = transfer.extend(trimmed, arch, seed=cfg.seed + 2)
        else:
            specs = transfer.base_specs(cfg.base_filters, cfg.base_lengths, cfg.base_dense)
            model = transfer.scratch_model(specs[:transfer.TRIM_DEPTH], arch,
                                           (cfg.n_samples, 1), seed=cfg.seed + 2)

        def progress(epoch, loss, acc, test_acc, mode=mode):
            log.info("%s epoch %d/%d loss %.4f train %.4f test %.4f", mode, epoch + 1,
                     cfg.final_epochs, loss, acc, test_acc)

        start = time.perf_counter()
        history, curve = transfer.train_eval(model, train_set, test_set,
                                             train_config(cfg, cfg.final_epochs, 2), progress)
        per_epoch = (time.perf_counter() - start) / cfg.final_epochs
        save_model(model, out / f"final_model_{mode}.rnn")
        results[mode] = (history, curve, per_epoch, model)
        log.info("%s: final test accuracy %.4f (%.2f s/epoch, %d trainable params)", mode,
                 curve[-1], per_epoch, model.count_params(trainable_only=True))

    rows = []
    for e in range(cfg.final_epochs):
        row = [e + 1]
        for mode in ("scratch", "transfer"):
            if mode in results:
                row += [results[mode][0][e][1], results[mode][1][e]]
            else:
                row += [None, None]
        rows.append(row)
    write_csv(out / FINAL_CURVES,
              ["epoch", "train_scratch", "test_scratch", "train_transfer", "test_transfer"], rows)
    return results


def evaluate_cmd(cfg, out, model_path=None):
    out = Path(out)
    if model_path is None:
        for name in ("final_model_transfer.rnn", "final_model_scratch.rnn", BASE_MODEL):
            if (out / name).exists():
                model_path = out / name
                break
        else:
            raise MissingArtifactError(f"no model in {out}; run `pretrain` or `train-final` first")
    elif not Path(model_path).exists():
        raise MissingArtifactError(f"{model_path} not found")
    model = load_model(model_path)
    records = load_preprocessed(cfg, out)
    _, test_set = final_split(cfg, records)
    x, y = records_to_arrays(test_set)
    accuracy, confusion = evaluate(model, x, y, N_CLASSES)
    rows = [[c] + confusion[c].tolist() for c in range(N_CLASSES)]
    write_csv(out / CONFUSION, ["true_class"] + [f"pred_{c}" for c in range(N_CLASSES)], rows)
    recall = {CLASS_NAMES[c]: (confusion[c, c] / confusion[c].sum() if confusion[c].sum() else None)
              for c in range(N_CLASSES)}
    summary = {"model": Path(model_path).name, "n_test": int(len(y)), "accuracy": accuracy,
               "recall": recall}
    (out / EVALUATION).write_text(json.dumps(summary, indent=2) + "\n")
    log.info("accuracy %.4f on %d test records (%s)", accuracy, len(y), Path(model_path).name)
    return accuracy, confusion


def report(cfg, out):
    """Moving-averaged GA fitness curves, plus final-training curves if present."""
    out = Path(out)
    logs = ga.read_log(_require(out, GA_LOG, "evolve"))
    means = np.array([entry.mean_fitness for entry in logs])
    window = min(REPORT_MA_WINDOW, len(means))
    smooth = dsp.moving_average(means, window)
    write_csv(out / FITNESS_REPORT,
              ["generation", "max_fitness", "mean_fitness", "mean_fitness_ma10"],
              [(e.generation, e.max_fitness, e.mean_fitness, s) for e, s in zip(logs, smooth)])
    if (out / FINAL_CURVES).exists():
        header, rows = read_csv(out / FINAL_CURVES)
        final = {}
        for col in ("test_scratch", "test_transfer"):
            vals = [r[header.index(col)] for r in rows]
            final[col] = float(vals[-1]) if vals and vals[-1] else None
        write_csv(out / FINAL_CURVES_REPORT, ["metric", "value"], sorted(final.items()))
    (out / "run_config.json").write_text(json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n")
    return smooth
