"""Command-line front end: fit, band, test, simulate and constants."""

import argparse
import dataclasses
import json
import logging
import multiprocessing
import os
import sys

import numpy as np
import pandas as pd

from . import band as band_mod
from . import config as config_mod
from . import regress
from . import sim
from .errors import ConfigError, IpwScbError, exitCode
from .kernel import quarticKernel
from .observed import ObservedSample
from .selection import fitSelection, hosmerLemeshow

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_SIG_DIGITS = 12
_FLOAT_FORMAT = "%.12g"
_COMMANDS = ("fit", "band", "test")


def _round(value):
    """Float at 12 significant digits; NaN and inf become None."""
    value = float(value)
    if not np.isfinite(value):
        return None
    return float("{0:.{1}g}".format(value, _SIG_DIGITS))


def _roundTree(item):
    if isinstance(item, dict):
        return {k: _roundTree(v) for k, v in item.items()}
    if isinstance(item, (list, tuple)):
        return [_roundTree(v) for v in item]
    if isinstance(item, (bool, np.bool_, str)) or item is None:
        return item if not isinstance(item, np.bool_) else bool(item)
    if isinstance(item, (int, np.integer)):
        return int(item)
    return _round(item)


def ingestCsv(path):
    """Read a delta,x,y file into an ObservedSample."""
    sample = ObservedSample(filename=path)
    logger.info("> ingestCsv: {0}: n={1}, n_complete={2}, r_n={3:.4f}".format(
        path, sample.n, sample.n_complete, sample.r_n))
    return sample


def _nullValues(config, sample, model, grid):
    kind = config.null_kind
    if kind == "none":
        return None, None
    if kind == "linear":
        a, b = band_mod.weightedLinearNull(sample, model)
        return a + b * grid, {"kind": "linear", "intercept": a, "slope": b}

    if not os.path.isfile(config.null):
        raise ConfigError("no such null curve file: {0}".format(config.null), keys=("null",))
    frame = pd.read_csv(config.null)
    if list(frame.columns) != ["x", "m0"]:
        raise ConfigError("null curve file must have header 'x,m0'", keys=("null",))
    frame = frame.sort_values("x")
    x0 = frame["x"].to_numpy(dtype=np.float64)
    m0 = frame["m0"].to_numpy(dtype=np.float64)
    if x0[0] > grid[0] or x0[-1] < grid[-1]:
        raise ConfigError("null curve does not span [{0:.6g}, {1:.6g}]".format(grid[0], grid[-1]), keys=("null",))
    return np.interp(grid, x0, m0), {"kind": "file", "path": config.null}


def _bandRecord(band):
    return {
        "alpha": band.alpha,
        "level": 1.0 - band.alpha,
        "complete_case": band.complete_case,
        "constants": band.constants(),
        "failed_indices": band.failed_indices.tolist(),
        "grid": band.grid,
        "m_hat": band.m_hat,
        "lower": band.lower,
        "upper": band.upper,
        "d_hat": band.d_hat}


def runAnalysis(config, command="test"):
    """Run the analysis pipeline up to `command` and write artifacts to config.out_dir."""
    if command not in _COMMANDS:
        raise ValueError("command must be one of {0}".format(_COMMANDS))
    if command == "test" and config.null_kind == "none":
        raise ConfigError("the test command needs --null linear or a null curve file", keys=("null",))
    sample = ingestCsv(config.input)

    model = fitSelection(config.family, sample.y, sample.delta, floor=config.pi_floor)
    logger.info("> runAnalysis: alpha_hat = ({0:.5g}, {1:.5g}), converged={2}".format(
        model.alpha[0], model.alpha[1], model.converged))
    hl = hosmerLemeshow(model, sample.y, sample.delta, groups=config.groups)
    logger.info("> runAnalysis: Hosmer-Lemeshow statistic {0:.4g} on {1} dof, p = {2:.4g}".format(
        hl.statistic, hl.dof, hl.pvalue))

    result = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "input": config.input,
        "seed": config.seed,
        "n": sample.n,
        "n_complete": sample.n_complete,
        "r_n": sample.r_n,
        "selection": {
            "family": config.family.name.lower(),
            "alpha": list(model.alpha),
            "floor": model.floor,
            "converged": model.converged,
            "iterations": model.iterations,
            "loglik": model.loglik},
        "hosmer_lemeshow": {
            "statistic": hl.statistic,
            "dof": hl.dof,
            "pvalue": hl.pvalue,
            "groups": hl.groups,
            "collapsed": hl.collapsed}}

    bands = []
    if command in ("band", "test"):
        interval = regress.observedRange(sample)
        kernel = quarticKernel()
        h_rot = regress.rotBandwidth(sample)
        fit_config = regress.FitConfig(
            kernel=kernel,
            h=regress.scbBandwidth(h_rot, sample.n, config.rho),
            h_f=regress.silvermanBandwidth(sample),
            rho=config.rho)
        logger.info("> runAnalysis: h_rot={0:.5g}, h={1:.5g}, h_f={2:.5g}".format(
            h_rot, fit_config.h, fit_config.h_f))
        result["interval"] = dataclasses.asdict(interval)
        result["bandwidths"] = {"h_rot": h_rot, "h": fit_config.h, "h_f": fit_config.h_f, "rho": config.rho}

        base = band_mod.buildBand(sample, model, fit_config, interval, config.grid_size, config.alpha_levels[0])
        bands = [base.relevel(alpha) for alpha in config.alpha_levels]
        result["bands"] = [_bandRecord(b) for b in bands]

        if command == "test":
            null_values, null_info = _nullValues(config, sample, model, base.grid)
            test = band_mod.nullHypothesisTest(base, null_values)
            logger.info("> runAnalysis: sup statistic {0:.4g}, p = {1:.4g}, minimum covering level {2:.4g}".format(
                test.sup_stat, test.pvalue, test.min_cover_level))
            result["null"] = null_info
            result["test"] = dataclasses.asdict(test)
            result["test"]["null_values"] = null_values
            if 0.0 < test.pvalue < 1.0:
                result["min_cover_band"] = _bandRecord(base.relevel(test.pvalue))

    writeArtifacts(result, bands, config)
    return result


def writeArtifacts(result, bands, config):
    """Write <command>.json, or <command>_summary.csv plus <command>_band.csv."""
    os.makedirs(config.out_dir, exist_ok=True)
    command = result["command"]
    if config.format == "json":
        path = os.path.join(config.out_dir, command + ".json")
        with open(path, "w", encoding="utf-8") as file:
            json.dump(_roundTree(_listify(result)), file, indent=2)
        logger.info("> writeArtifacts: wrote {0}".format(path))
        return

    summary = _flatten({k: v for k, v in result.items() if k not in ("bands", "min_cover_band")})
    summary = _roundTree({k: v for k, v in summary.items() if not isinstance(v, (list, np.ndarray))})
    frame = pd.DataFrame({"key": list(summary.keys()), "value": list(summary.values())})
    path = os.path.join(config.out_dir, command + "_summary.csv")
    frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT)
    if bands:
        frames = []
        for band in bands:
            table = band.toFrame()
            table.insert(0, "alpha", band.alpha)
            frames.append(table)
        if "min_cover_band" in result:
            record = result["min_cover_band"]
            table = pd.DataFrame({k: record[k] for k in ("grid", "m_hat", "lower", "upper", "d_hat")})
            table = table.rename(columns={"grid": "x"})
            table.insert(0, "alpha", record["alpha"])
            frames.append(table)
        pd.concat(frames, ignore_index=True).to_csv(
            os.path.join(config.out_dir, command + "_band.csv"), index=False, float_format=_FLOAT_FORMAT)
    logger.info("> writeArtifacts: wrote {0}".format(path))


def _listify(item):
    if isinstance(item, dict):
        return {k: _listify(v) for k, v in item.items()}
    if isinstance(item, np.ndarray):
        return item.tolist()
    if isinstance(item, (list, tuple)):
        return [_listify(v) for v in item]
    return item


def _flatten(tree, prefix=""):
    flat = {}
    for key, value in tree.items():
        name = prefix + str(key)
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        elif isinstance(value, (list, tuple)) and len(value) <= 2 and all(np.isscalar(v) for v in value):
            for i, v in enumerate(value):
                flat["{0}.{1}".format(name, i)] = v
        else:
            flat[name] = value
    return flat


def runSimulation(config_path, out_dir=".", n_processes=multiprocessing.cpu_count(), seed=None):
    """Run every scenario in a YAML file and write tables, per-scenario JSON and plot data."""
    scenarios = config_mod.loadScenarios(config_path)
    if seed is not None:
        scenarios = [dataclasses.replace(s, base_seed=seed) for s in scenarios]
    os.makedirs(out_dir, exist_ok=True)

    reports = []
    for scenario in scenarios:
        report = sim.runScenario(scenario, n_processes=n_processes)
        reports.append(report)
        with open(os.path.join(out_dir, scenario.label + ".json"), "w", encoding="utf-8") as file:
            record = report.toDict()
            record["schema_version"] = SCHEMA_VERSION
            json.dump(_roundTree(record), file, indent=2)
        if scenario.plot_data:
            sim.plotData(scenario).to_csv(
                os.path.join(out_dir, scenario.label + "_plot.csv"), index=False, float_format=_FLOAT_FORMAT)

    with open(os.path.join(out_dir, "table.csv"), "w", encoding="utf-8") as file:
        file.write(sim.emitTable(reports, "csv"))
    with open(os.path.join(out_dir, "table.md"), "w", encoding="utf-8") as file:
        file.write(sim.emitTable(reports, "markdown"))
    logger.info("> runSimulation: {0} scenarios written to {1}".format(len(reports), out_dir))
    return reports


def printConstants(alpha_levels, h=None, a0=None, b0=None, file=None):
    """Print kernel functionals, Gumbel quantiles and optionally a_h, b_h."""
    kernel = quarticKernel()
    lines = [
        "kernel = {0}".format(kernel.name),
        "lambda = {0:.12g}".format(kernel.lam),
        "C = {0:.12g}".format(kernel.cee),
        "mu2 = {0:.12g}".format(kernel.mu2)]
    for alpha in alpha_levels:
        lines.append("q_{0:g} = {1:.12g}".format(alpha, band_mod.gumbelQuantile(alpha)))
    if h is not None:
        a_h, b_h = band_mod.criticalConstants(h, a0, b0, kernel)
        lines.append("a_h = {0:.12g}".format(a_h))
        lines.append("b_h = {0:.12g}".format(b_h))
    if file is None:
        file = sys.stdout
    for line in lines:
        print(line, file=file)
    return lines


def _analysisArguments(parser):
    parser.add_argument("--input", required=True, help="delta,x,y CSV file")
    parser.add_argument("--family", default="logit", choices=["logit", "probit"])
    parser.add_argument("--alpha", type=float, action="append", dest="alpha_levels",
                        help="error probability; repeat for several levels (default 0.05)")
    parser.add_argument("--rho", type=float, default=0.25)
    parser.add_argument("--grid-size", type=int, default=401)
    parser.add_argument("--pi-floor", type=float, default=0.01)
    parser.add_argument("--groups", type=int, default=10, help="Hosmer-Lemeshow groups")
    parser.add_argument("--null", default="none", help="none, linear, or an x,m0 CSV file")
    parser.add_argument("--format", default="json", choices=["json", "csv"])
    parser.add_argument("--out-dir", default=".")
    parser.add_argument("--seed", type=int, default=0)


def buildParser():
    parser = argparse.ArgumentParser(
        prog="ipw_scb",
        description="Simultaneous confidence bands for regression with covariates missing at random.")
    parser.add_argument("-v", "--verbose", action="store_true")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for command in _COMMANDS:
        _analysisArguments(subparsers.add_parser(command))

    simulate = subparsers.add_parser("simulate")
    simulate.add_argument("--config", required=True, help="YAML scenario file")
    simulate.add_argument("--out-dir", default=".")
    simulate.add_argument("--processes", type=int, default=multiprocessing.cpu_count())
    simulate.add_argument("--seed", type=int, default=None, help="override base_seed of every scenario")

    constants = subparsers.add_parser("constants")
    constants.add_argument("--alpha", type=float, action="append", dest="alpha_levels")
    constants.add_argument("--h", type=float)
    constants.add_argument("--a0", type=float)
    constants.add_argument("--b0", type=float)
    return parser


def analysisConfig(args):
    return config_mod.AnalysisConfig(
        input=args.input,
        family=config_mod.parseFamily(args.family),
        alpha_levels=tuple(args.alpha_levels or (0.05,)),
        rho=args.rho,
        grid_size=args.grid_size,
        pi_floor=args.pi_floor,
        groups=args.groups,
        null=args.null,
        format=args.format,
        out_dir=args.out_dir,
        seed=args.seed)


def main(argv=None):
    args = buildParser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command in _COMMANDS:
            runAnalysis(analysisConfig(args), command=args.command)
        elif args.command == "simulate":
            runSimulation(args.config, out_dir=args.out_dir, n_processes=args.processes, seed=args.seed)
        else:
            if args.h is not None and (args.a0 is None or args.b0 is None):
                raise ConfigError("--h needs --a0 and --b0", keys=("a0", "b0"))
            printConstants(args.alpha_levels or (0.05, 0.01), args.h, args.a0, args.b0)
    except (IpwScbError, ValueError) as err:
        print("error: {0}".format(err), file=sys.stderr)
        return exitCode(err)
    return 0


if __name__ == "__main__":
    sys.exit(main())
