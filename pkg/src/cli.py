#!/usr/bin/env python
"""
Command-line entry point.

    python -m src.cli transform patch.csv --output coeffs.csv
    python -m src.cli quantum patch.csv --mode shots --shots 20000 --seed 0
    python -m src.cli mse Q.csv C.csv
    python -m src.cli noise patch.csv --p 0.01 0.05 0.1 --trials 1000
    python -m src.cli cost model.json
    python -m src.cli train-demo --epochs 200 --lr 0.05 --output trace.csv
    python -m src.cli circuit

Matrices are CSV, reports JSON. Failures print one ``error:`` line on stderr and
exit with status 1 without leaving output files behind.
"""
import argparse
import json
import sys

import numpy as np

from config.hwt_config import (DEFAULT_SHOTS, FLOAT_FORMAT, NOISE_PROBS, NOISE_TRIALS,
                               TRAIN_EPOCHS, TRAIN_LR, TRAIN_PATCH_SIZE, TRAIN_SAMPLES,
                               default_seed)
from PatchUtils import PatchUtil, StripesDS
from src.costs import cost_model
from src.errors import HwtError, ModelDescriptionError, ParameterError, ShapeError
from src.haar.haar_core import HaarPlan, Variant, dwt1d, dwt2d, idwt1d, idwt2d, log2_int
from src.haar.wt_layer import TRANSFORMS
from src.project_logger import get_logger
from src.quantum import qsim
from src.train import train_toy

logger = get_logger(__name__)


def _emit_json(doc, output):
    if output:
        PatchUtil.write_json(doc, output)
    else:
        sys.stdout.write(PatchUtil.dumps(doc) + '\n')


def cmd_transform(args) -> int:
    data = PatchUtil.read_matrix(args.input)
    n = data.shape[-1]
    if data.ndim == 2 and data.shape[0] != n:
        raise ShapeError(f"2D input must be square, got {data.shape[0]}x{n}")
    if n < 2 or n & (n - 1):
        raise ShapeError(f"input side must be a power of two >= 2, got {n}")
    levels = log2_int(n) if args.levels is None else args.levels
    plan = HaarPlan(n, levels, Variant(args.variant))
    if data.ndim == 1:
        out = idwt1d(data, plan) if args.inverse else dwt1d(data, plan)
    else:
        out = idwt2d(data, plan) if args.inverse else dwt2d(data, plan)
    PatchUtil.write_matrix(out, args.output)
    logger.info("%s transform of %s written to %s", 'inverse' if args.inverse else 'forward',
                args.input, args.output)
    return 0


def cmd_quantum(args) -> int:
    patch = PatchUtil.read_patch(args.input)
    report = qsim.quantum_report(patch, mode=args.mode, shots=args.shots, seed=args.seed)
    _emit_json(report, args.output)
    return 0


def cmd_mse(args) -> int:
    Q = PatchUtil.read_patch(args.q)
    C = PatchUtil.read_patch(args.c)
    _emit_json({'mse': qsim.mse(Q, C)}, args.output)
    return 0


def cmd_noise(args) -> int:
    patch = PatchUtil.read_patch(args.input)
    sweep = qsim.noise_sweep(patch, args.p, trials=args.trials, seed=args.seed,
                             per_gate=args.per_gate)
    doc = {'seed': args.seed, 'trials': args.trials, 'per_gate': args.per_gate,
           'results': sweep.to_dict(orient='records')}
    _emit_json(doc, args.output)
    return 0


def cmd_cost(args) -> int:
    if args.model:
        with open(args.model, 'r') as handle:
            try:
                doc = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ModelDescriptionError(f"{args.model} is not valid JSON: {exc}") from None
        layers = cost_model.parse_model(doc)
        report = cost_model.cost_report(layers).to_dict()
        report['layers'] = [dict(spec.to_dict(), macs=cost_model.macs(spec),
                                 params=cost_model.params(spec)) for spec in layers]
    elif args.resnet20:
        count = cost_model.resnet20_params(args.resnet20, args.paths, args.policy)
        report = {'variant': args.resnet20, 'paths': args.paths, 'policy': args.policy,
                  'params': count, 'baseline_params': cost_model.resnet20_params('baseline'),
                  'reduction_vs_baseline': cost_model.parameter_reduction(args.resnet20, args.paths,
                                                                          args.policy)}
    elif args.table1:
        c, n = args.table1
        report = {'c': c, 'n': n, 'rows': cost_model.table1(c, n).to_dict(orient='records')}
    else:
        raise ParameterError("cost needs a model file, --resnet20 or --table1")
    _emit_json(report, args.output)
    return 0


def cmd_train_demo(args) -> int:
    dataset = StripesDS(args.samples, size=TRAIN_PATCH_SIZE, seed=args.seed)
    result = train_toy(dataset, epochs=args.epochs, lr=args.lr, seed=args.seed,
                       transform=args.transform)
    if args.output:
        PatchUtil.write_frame(result.trace, args.output)
    else:
        result.trace.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT)
    print(f"epochs={args.epochs} initial_loss={result.initial_loss:.6f} "
          f"final_loss={result.final_loss:.6f} final_accuracy={result.final_accuracy:.4f}",
          file=sys.stderr if not args.output else sys.stdout)
    return 0


def cmd_circuit(args) -> int:
    seq = qsim.haar_circuit()
    doc = json.loads(qsim.gates_to_json(seq))
    doc['stats'] = qsim.circuit_stats(seq)
    doc['readout_permutation'] = qsim.READOUT_PERMUTATION.tolist()
    _emit_json(doc, args.output)
    return 0


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"probability must be in [0, 1], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='hwt', description=__doc__.split('\n\n')[0])
    sub = parser.add_subparsers(dest='command', required=True)
    seed = default_seed()

    p = sub.add_parser('transform', help='1D/2D multilevel Haar transform of a CSV matrix')
    p.add_argument('input')
    p.add_argument('--output', required=True)
    p.add_argument('--inverse', action='store_true')
    p.add_argument('--levels', type=int, default=None, help='default: full depth')
    p.add_argument('--variant', choices=[v.value for v in Variant], default=Variant.ORTHONORMAL.value)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser('quantum', help='run a 4x4 patch through the Haar circuit')
    p.add_argument('input')
    p.add_argument('--mode', choices=[m.value for m in qsim.ReadoutMode],
                   default=qsim.ReadoutMode.EXACT_STATEVECTOR.value)
    p.add_argument('--shots', type=int, default=DEFAULT_SHOTS)
    p.add_argument('--seed', type=int, default=seed)
    p.add_argument('--output')
    p.set_defaults(func=cmd_quantum)

    p = sub.add_parser('mse', help='mean squared error between two matrices')
    p.add_argument('q')
    p.add_argument('c')
    p.add_argument('--output')
    p.set_defaults(func=cmd_mse)

    p = sub.add_parser('noise', help='Pauli-noise eps_max sweep')
    p.add_argument('input')
    p.add_argument('--p', type=_probability, nargs='+', default=list(NOISE_PROBS))
    p.add_argument('--trials', type=int, default=NOISE_TRIALS)
    p.add_argument('--seed', type=int, default=seed)
    p.add_argument('--per-gate', action='store_true')
    p.add_argument('--output')
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser('cost', help='MAC / parameter report')
    p.add_argument('model', nargs='?', help='JSON list of layer specs')
    p.add_argument('--resnet20', choices=[v.value for v in cost_model.Variant])
    p.add_argument('--paths', type=int, default=1)
    p.add_argument('--policy', choices=cost_model.REPLACEMENT_POLICIES, default='second_conv')
    p.add_argument('--table1', type=int, nargs=2, metavar=('C', 'N'))
    p.add_argument('--output')
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser('train-demo', help='train the layer on synthetic stripes')
    p.add_argument('--epochs', type=int, default=TRAIN_EPOCHS)
    p.add_argument('--lr', type=float, default=TRAIN_LR)
    p.add_argument('--seed', type=int, default=seed)
    p.add_argument('--samples', type=int, default=TRAIN_SAMPLES)
    p.add_argument('--transform', choices=list(TRANSFORMS), default='haar')
    p.add_argument('--output')
    p.set_defaults(func=cmd_train_demo)

    p = sub.add_parser('circuit', help='export the Haar gate sequence as JSON')
    p.add_argument('--output')
    p.set_defaults(func=cmd_circuit)
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except HwtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    args = parser.parse_args(argv)
    logger.info("running %s", args.command)
    try:
        return args.func(args)
    except (HwtError, OSError) as exc:
        message = str(exc).replace('\n', ' ')
        logger.error("%s failed: %s", args.command, message)
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    np.seterr(all='raise')
    sys.exit(main())
