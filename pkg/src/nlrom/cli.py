"""Command-line front end.

Every subcommand reads and writes the JSON/CSV artifacts of :mod:`nlrom.io`
and :class:`nlrom.continuation.Curve`. Usage errors exit with status 2 and
numerical failures exit with status 1, the module error text going to
stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io
from .errors import ConvergenceError, ReductionError, SchemaError

class UsageError(Exception):
    """Bad command-line input detected after argument parsing."""


ROM_METHODS = ("graph", "graph-multi", "nf", "dnf", "ice", "qm-md", "qm-smd", "static",
               "engine")


def _entry(order):
    def parse(text):
        idx, sep, val = text.partition("=")
        parts = idx.replace(" ", "").split(",")
        if not sep or len(parts) != order:
            raise argparse.ArgumentTypeError(
                f"expected {order} comma-separated indices and '=value', got {text!r}")
        try:
            return tuple(int(p) for p in parts) + (float(val),)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc

    return parse


def _masters_arg(text):
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"masters must be comma-separated integers: {text!r}") \
            from exc


def _modal(model, n_modes=None):
    from .model import ModalModel, assemble_modal

    if isinstance(model, ModalModel):
        return model
    return assemble_modal(model, n_modes)


def _physical(model):
    from .model import ModalModel

    return model.as_physical() if isinstance(model, ModalModel) else model


def _emit(obj, path):
    if path:
        io.save_json(obj, path)
    else:
        json.dump(obj, sys.stdout, indent=1)
        sys.stdout.write("\n")


def cmd_zoo(args):
    from .model import PhysicalModel
    from .zoo import ZooSpec, beam_physical, make_two_dof

    if args.kind == "two-dof":
        if args.w1 is None or args.w2 is None:
            raise UsageError("two-dof needs --w1 and --w2")
        mm = make_two_dof(args.w1, args.w2, args.g, args.h)
        model = PhysicalModel.from_dense(np.eye(2), np.diag(mm.omega ** 2), mm.g, mm.h)
    else:
        try:
            spec = ZooSpec.from_pairs([f"kind={args.kind}"] + list(args.params))
        except TypeError as exc:
            raise UsageError(f"bad beam parameter: {exc}") from exc
        model = beam_physical(spec)
    _emit(io.model_to_dict(model), args.output)
    return 0


def cmd_modal(args):
    mm = _modal(io.load_model(args.model), args.n_modes)
    if args.xi is not None:
        mm = mm.with_damping(np.broadcast_to(args.xi, mm.omega.shape))
    _emit(io.modal_to_dict(mm), args.output)
    return 0


def cmd_step(args):
    from .step import step_model

    model = _physical(io.load_model(args.model))
    lam = None if args.lam == "auto" else float(args.lam)
    mm, res = step_model(model, args.n_modes, lam)
    out = io.modal_to_dict(mm)
    out["provenance"] = {"lambda": [float(v) for v in np.atleast_1d(res.lam)],
                         "n_cases": int(res.n_cases),
                         "symmetry_violation": float(res.symmetry_violation)}
    if res.symmetry_violation > 1e-9:
        print(f"warning: identified tensors violate symmetry by {res.symmetry_violation:.3g}",
              file=sys.stderr)
    _emit(out, args.output)
    return 0


def build_rom(model, method, masters, amp_target=0.05, order=3, n_modes=None,
              samples_csv=None):
    """Dispatch a ROM construction by method name.

    Returns
    -------
    ReducedModel, ManifoldMap
    """
    from . import condensation, invariant, qm
    from .parametrisation import diagonalize, parametrise, to_real_graph

    single = masters[0]
    if method in ("graph", "static") and len(masters) != 1:
        raise SchemaError(f"method '{method}' takes a single master")
    if method == "dnf":
        mp, rm = invariant.dnf_second_order(_physical(model), masters)
    elif method in ("qm-md", "qm-smd"):
        mp, rm = qm.qm_build(model, masters, "full" if method == "qm-md" else "static")
    elif method == "ice":
        samples = condensation.ice_sample(model, masters, amp_target=amp_target)
        if samples_csv:
            samples.to_csv(samples_csv)
        rm = condensation.ice_fit(samples, order)
        mp = condensation.ice_map(samples, order)
    else:
        mm = _modal(model, n_modes)
        if method == "graph":
            mp, rm = invariant.graph_single(mm, single)
        elif method == "graph-multi":
            mp, rm = invariant.graph_multi(mm, masters)
        elif method == "nf":
            mp, rm = invariant.nf_third_order(mm, masters)
        elif method == "static":
            rm = condensation.static_condensation_third(mm, single)
            mp = condensation.stress_manifold_map(mm, single)
        elif method == "engine":
            mp, rm = to_real_graph(parametrise(diagonalize(mm), masters, order))
        else:
            raise SchemaError(f"unknown method {method!r}")
    return rm, mp


def cmd_rom(args):
    model = io.load_model(args.model)
    rm, mp = build_rom(model, args.method, args.masters, args.amp_target, args.order,
                       args.n_modes, args.samples_csv)
    if args.xi is not None:
        rm = rm.with_damping(np.broadcast_to(args.xi, rm.omega.shape))
    _emit(io.rom_to_dict(rm, mp), args.output)
    return 0


def cmd_gamma(args):
    from .dynamics import gamma_closed_form, gamma_rom

    if args.rom:
        rm, _ = io.load_rom(args.model)
        value = gamma_rom(rm, args.master)
    else:
        value = gamma_closed_form(_modal(io.load_model(args.model), args.n_modes),
                                  args.master, args.method)
    print(repr(float(value)))
    return 0


def cmd_backbone(args):
    from .continuation import backbone, gamma_from_backbone

    rm, _ = io.load_rom(args.rom)
    curve = backbone(rm, args.a_max, args.master, args.harmonics)
    curve.to_csv(args.output)
    if len(curve) >= 6:
        print(f"gamma_fit={gamma_from_backbone(curve, master=args.master)!r}")
    return 0


def cmd_frf(args):
    from .continuation import frf

    rm, _ = io.load_rom(args.rom)
    if args.xi is not None:
        rm = rm.with_damping(np.broadcast_to(args.xi, rm.omega.shape))
    if args.force is not None:
        rm = rm.with_forcing(np.broadcast_to(args.force, rm.omega.shape))
    if rm.forcing is None:
        raise SchemaError("frf needs --force or a ROM with a 'forcing' field")
    curve = frf(rm, args.omega_range, args.harmonics, ds=args.ds, ds_max=args.ds_max)
    curve.to_csv(args.output)
    tags = {t: len(curve.tags(t)) for t in ("SN", "PF", "NS-candidate")}
    print(" ".join(f"{k}={v}" for k, v in tags.items()))
    return 0


def run_validation(model, masters=(0,), n_modes=None):
    """Named property checks on a model.

    Returns
    -------
    list of (name, passed, detail)
    """
    from .condensation import correction_factor
    from .dynamics import gamma_closed_form, gamma_parts
    from .invariant import gamma_equivalence_check
    from .model import check_tensor_symmetry
    from .parametrisation import (diagonalize, gamma_engine, invariance_residual, parametrise,
                                  residual_slope)

    out = []

    def check(name, fun):
        try:
            ok, detail = fun()
        except (ReductionError, ConvergenceError, ValueError, np.linalg.LinAlgError) as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))

    mm = _modal(model, n_modes)

    def symmetry():
        rep = check_tensor_symmetry(model, 1e-12)
        return rep.passed, f"max violation {max(rep.max_violation.values()):.3g}"

    def slope():
        sys_ = diagonalize(mm, damping_ratio=np.zeros(mm.n_modes))
        amps = np.geomspace(1e-3, 1e-2, 5)
        slopes = [residual_slope(amps, invariance_residual(parametrise(sys_, masters, 3, st),
                                                           amps))
                  for st in ("graph", "normal-form")]
        return all(abs(s - 4.0) <= 0.3 for s in slopes), \
            "slopes " + ", ".join(f"{s:.4f}" for s in slopes)

    def equivalence():
        res = gamma_equivalence_check(mm, masters[0])
        dg = abs(res["gamma_graph"] - res["gamma_nf"])
        ok = (dg <= 1e-10 * max(1.0, abs(res["gamma_nf"])) and abs(res["slope"] - 4) <= 0.3
              and res["max_geometry_difference"] <= 1e-12)
        return ok, (f"|dGamma|={dg:.3g}, slope={res['slope']:.4f}, "
                    f"geometry={res['max_geometry_difference']:.3g}")

    def identities():
        m = masters[0]
        g_cf = gamma_closed_form(mm, m, "nf")
        g_en = gamma_engine(mm, m)
        ok = abs(g_cf - g_en) <= 1e-8 * max(1.0, abs(g_cf))
        detail = f"closed form {g_cf:.12g} vs engine {g_en:.12g}"
        if mm.n_modes == 2:
            s = 1 - m
            c_nf, s_nf = gamma_parts(mm, m, "nf")
            _, s_ice = gamma_parts(mm, m, "ice")
            rho = mm.omega[s] / mm.omega[m]
            if abs(s_ice) > 1e-300 and mm.h[m, m, m, m] == 0 and abs(rho - 2) > 1e-3:
                ratio = s_nf / s_ice
                ok = ok and abs(ratio - correction_factor(rho)) <= 1e-10
                detail += f"; ratio {ratio:.12g} vs R(rho) {correction_factor(rho):.12g}"
        return ok, detail

    check("symmetry", symmetry)
    check("invariance-slope", slope)
    check("equivalence", equivalence)
    check("gamma-identities", identities)
    return out


def cmd_validate(args):
    results = run_validation(io.load_model(args.model), args.masters, args.n_modes)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    n_ok = sum(ok for _, ok, _ in results)
    print(f"{n_ok}/{len(results)} checks passed")
    return 0 if n_ok == len(results) else 1


def cmd_compare(args):
    from .dynamics import compare_manifolds

    _, mpa = io.load_rom(args.rom_a)
    _, mpb = io.load_rom(args.rom_b)
    if mpa is None or mpb is None:
        raise SchemaError("both ROM files need a 'map' field")
    if mpa.space != mpb.space:
        if args.model is None:
            raise SchemaError("maps live in different coordinate spaces; pass --model to "
                              "project the physical one on the modes")
        from .dynamics import modal_projection
        from .model import assemble_modal

        n_modes = (mpa if mpa.space == "modal" else mpb).n_out
        phys = _physical(io.load_model(args.model))
        mm = assemble_modal(phys, n_modes)
        mpa, mpb = (modal_projection(mp, mm.V, phys.mass) if mp.space == "physical" else mp
                    for mp in (mpa, mpb))
    res = compare_manifolds(mpa, mpb, args.amplitudes, args.omega)
    print("amplitude,zero_velocity,full_circle")
    for a, z, c in zip(res["amplitudes"], res["zero_velocity"], res["full_circle"]):
        print(f"{float(a)!r},{float(z)!r},{float(c)!r}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="nlrom", description="Nonlinear reduced-order models of "
                                "structures with quadratic and cubic stiffness.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("zoo", help="generate a model")
    s.add_argument("kind", choices=("two-dof", "vk-beam", "foundation-beam", "shallow-arch"))
    s.add_argument("params", nargs="*", help="beam parameters as key=value")
    s.add_argument("--w1", type=float)
    s.add_argument("--w2", type=float)
    s.add_argument("--g", type=_entry(3), action="append", help="quadratic entry s,i,j=v")
    s.add_argument("--h", type=_entry(4), action="append", help="cubic entry s,i,j,k=v")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_zoo)

    s = sub.add_parser("modal", help="eigen-solve and project the tensors")
    s.add_argument("model")
    s.add_argument("--n-modes", type=int)
    s.add_argument("--xi", type=float, help="modal damping ratio")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_modal)

    s = sub.add_parser("step", help="identify modal tensors from force evaluations")
    s.add_argument("--model", required=True)
    s.add_argument("--lambda", dest="lam", default="auto")
    s.add_argument("--n-modes", type=int)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_step)

    s = sub.add_parser("rom", help="build a reduced model")
    s.add_argument("model")
    s.add_argument("--method", choices=ROM_METHODS, required=True)
    s.add_argument("--masters", type=_masters_arg, default=(0,))
    s.add_argument("--amp-target", type=float, default=0.05)
    s.add_argument("--order", type=int, default=3)
    s.add_argument("--n-modes", type=int)
    s.add_argument("--xi", type=float)
    s.add_argument("--samples-csv", help="write the condensation samples here")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_rom)

    s = sub.add_parser("gamma", help="backbone curvature")
    s.add_argument("model")
    s.add_argument("--method", choices=("nf", "ice", "qm-md", "qm-smd"), default="nf")
    s.add_argument("--master", type=int, default=0)
    s.add_argument("--n-modes", type=int)
    s.add_argument("--rom", action="store_true", help="MODEL is a ROM file")
    s.set_defaults(func=cmd_gamma)

    s = sub.add_parser("backbone", help="backbone curve of a conservative ROM")
    s.add_argument("rom")
    s.add_argument("--a-max", type=float, required=True)
    s.add_argument("--master", type=int, default=0)
    s.add_argument("--harmonics", type=int, default=7)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_backbone)

    s = sub.add_parser("frf", help="forced response of a damped ROM")
    s.add_argument("rom")
    s.add_argument("--omega-range", type=float, nargs=2, required=True)
    s.add_argument("--xi", type=float)
    s.add_argument("--force", type=float)
    s.add_argument("--harmonics", type=int, default=7)
    s.add_argument("--ds", type=float, default=0.01)
    s.add_argument("--ds-max", type=float, default=0.05)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_frf)

    s = sub.add_parser("validate", help="run the property checks on a model")
    s.add_argument("model")
    s.add_argument("--masters", type=_masters_arg, default=(0,))
    s.add_argument("--n-modes", type=int)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("compare", help="slave geometry gap between two ROM maps")
    s.add_argument("rom_a")
    s.add_argument("rom_b")
    s.add_argument("--amplitudes", type=float, nargs="+", default=[0.01, 0.05, 0.1])
    s.add_argument("--omega", type=float, nargs="+")
    s.add_argument("--model", help="model file used to project physical maps on the modes")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (ReductionError, ConvergenceError, SchemaError, ValueError, OSError,
            np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
