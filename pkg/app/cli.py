"""
aeqsim command line.

Examples:
  python -m app.cli polarizability-zeros --level 3P0 --range 600,650
  python -m app.cli blockade-curves --gamma-over-omega 1,10,100,1000 --delta-over-omega 0 --t-max 6.2832 -o curves.csv
  python -m app.cli register-run --protocol protocol.json --register reg.json --log events.jsonl
  python -m app.cli compile --circuit circuit.json --device device.json -o schedule.json
  python -m app.cli budget --schedule schedule.json
"""
import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

from pydantic import TypeAdapter, ValidationError

from app.core.config import settings
from app.core.errors import AeqsimError, ProtocolError
from app.models.blockade import BlockadeParams, TwoLevelAmplitudes
from app.models.budget import NoiseModel
from app.models.register import ProtocolOp, QubitEncoding, Register
from app.models.schedule import Circuit, Device, Schedule
from app.services.atomdata import atomdata_service
from app.services.blockade import blockade_service
from app.services.budget import budget_service
from app.services.compiler import compiler_service
from app.services.polarizability import polarizability_service
from app.services.register import register_service

logger = logging.getLogger("aeqsim")

PROTOCOL_ADAPTER = TypeAdapter(List[ProtocolOp])


# ----------------------------------------------------------------------
# argument helpers
# ----------------------------------------------------------------------
def float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def float_pair(text: str) -> Tuple[float, float]:
    values = float_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return values[0], values[1]


def read_json(path: str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def event_lines(events) -> str:
    return "".join(json.dumps(event.model_dump()) + "\n" for event in events)


def write_output(text: str, output: Optional[str]):
    """Write to stdout, or atomically to a file (temp file + rename)"""
    if not output:
        sys.stdout.write(text)
        return
    target = Path(output)
    directory = target.parent if str(target.parent) else Path(".")
    fd, tmp_path = tempfile.mkstemp(prefix=f".{target.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_path, target)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    logger.info(f"Wrote {target}")


def to_json(payload: Any) -> str:
    return json.dumps(payload, indent=2) + "\n"


def to_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def load_register(document: Any) -> Register:
    """Full Register document, or a short form with n_sites / qubit_sites / bits"""
    if isinstance(document, dict) and "branches" not in document:
        encoding = QubitEncoding.model_validate(document["encoding"]) if "encoding" in document else None
        return register_service.create_register(
            n_sites=document["n_sites"],
            qubit_sites=document["qubit_sites"],
            bits=document.get("bits"),
            spacing_nm=document.get("spacing_nm", 344.6),
            gradient=document.get("gradient_g_per_cm", 0.0),
            gradient_echo=document.get("gradient_echo", False),
            B=document.get("B_gauss", 0.0),
            trap_frequency_hz=document.get("trap_frequency_hz", 25e3),
            encoding=encoding,
        )
    return Register.model_validate(document)


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------
def cmd_polarizability_scan(args) -> int:
    species = atomdata_service.load_species_file(args.species)
    samples = polarizability_service.scan(species, args.level, args.range_nm, args.step_nm)
    if args.format == "json":
        text = to_json([sample.model_dump() for sample in samples])
    else:
        text = to_csv(["wavelength_nm", "alpha_au"], [(s.wavelength, s.alpha) for s in samples])
    write_output(text, args.output)
    return 0


def cmd_polarizability_zeros(args) -> int:
    species = atomdata_service.load_species_file(args.species)
    if args.compare_level:
        crossings = polarizability_service.find_magic_wavelengths(
            species, args.level, args.compare_level, args.range_nm, args.step_nm
        )
    else:
        crossings = polarizability_service.find_zero_crossings(species, args.level, args.range_nm, args.step_nm)
    write_output(to_json(crossings), args.output)
    return 0


def cmd_blockade_evolve(args) -> int:
    params = BlockadeParams.from_ratios(args.gamma_over_omega, args.delta_over_omega)
    if args.gate:
        write_output(to_json(blockade_service.blockade_gate_outcome(params).model_dump()), args.output)
        return 0

    psi0 = TwoLevelAmplitudes()
    if args.method == "rk4":
        psi = blockade_service.evolve_rk4(psi0=psi0, params=params, t=args.omega_t,
                                          dt=0.1 * blockade_service.max_rk4_step(params))
    else:
        psi = blockade_service.evolve(params, psi0, args.omega_t)

    payload = {**psi.to_dict(), "norm_squared": psi.norm_squared, "loss": 1 - psi.norm_squared}
    if args.format == "csv":
        text = to_csv(["omega_t", "loss"], [(args.omega_t, payload["loss"])])
    else:
        text = to_json(payload)
    write_output(text, args.output)
    return 0


def cmd_blockade_curves(args) -> int:
    curves = blockade_service.loss_curves(args.gamma_over_omega, args.delta_over_omega, args.t_max, args.n_points)
    if args.format == "json":
        text = to_json([curve.model_dump() for curve in curves])
    else:
        rows = [
            (curve.gamma_over_omega, curve.delta_over_omega, t, loss)
            for curve in curves
            for t, loss in zip(curve.times, curve.loss)
        ]
        text = to_csv(["gamma_over_omega", "delta_over_omega", "omega_t", "loss"], rows)
    write_output(text, args.output)
    return 0


def cmd_register_run(args) -> int:
    register = load_register(read_json(args.register))
    ops = PROTOCOL_ADAPTER.validate_python(read_json(args.protocol))
    species = atomdata_service.load_species_file(args.species)

    result = register_service.run_protocol(register, ops, species)
    payload = {"register": result.register.model_dump(mode="json")}
    if args.shots:
        if args.seed is None:
            raise AeqsimError("--shots needs --seed")
        sample = register_service.sample_losses(register, ops, args.shots, args.seed, species)
        payload["loss_sample"] = sample.model_dump()

    if args.log:
        write_output(event_lines(result.event_log), args.log)
    write_output(to_json(payload), args.output)
    return 0


def cmd_compile(args) -> int:
    circuit = Circuit.model_validate(read_json(args.circuit))
    device = Device.model_validate(read_json(args.device))
    species = atomdata_service.load_species_file(args.species)
    schedule = compiler_service.compile_circuit(circuit, device, species)
    write_output(to_json(schedule.model_dump(mode="json")), args.output)
    return 0


def cmd_budget(args) -> int:
    species = atomdata_service.load_species_file(args.species)
    noise = (
        NoiseModel.model_validate(read_json(args.noise)) if args.noise else budget_service.default_noise_model(species)
    )
    if args.schedule:
        schedule = Schedule.model_validate(read_json(args.schedule))
        budget = compiler_service.price(schedule, noise, species)
    else:
        budget = budget_service.storage_budget(species, noise, duration=args.storage_duration_s)
    write_output(to_json(budget.model_dump()), args.output)
    return 0


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aeqsim", description="Dual-lattice alkaline-earth simulator")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="logging level (stderr)")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, formats: Optional[Tuple[str, ...]] = None, default_format: Optional[str] = None):
        p.add_argument("-o", "--output", help="output path (default: stdout)")
        p.add_argument("--species", default=settings.AEQSIM_SPECIES_PATH, help="species document")
        if formats:
            p.add_argument("--format", choices=formats, default=default_format)

    p = sub.add_parser("polarizability-scan", help="alpha(lambda) on a wavelength grid")
    common(p, ("csv", "json"), "csv")
    p.add_argument("--level", required=True)
    p.add_argument("--range-nm", "--range", dest="range_nm", type=float_pair, required=True)
    p.add_argument("--step-nm", "--step", dest="step_nm", type=float, default=0.5)
    p.set_defaults(handler=cmd_polarizability_scan)

    p = sub.add_parser("polarizability-zeros", help="tune-out (or magic) wavelengths as a JSON array")
    common(p)
    p.add_argument("--level", required=True)
    p.add_argument("--compare-level", help="find sign changes of alpha(level) - alpha(compare-level)")
    p.add_argument("--range-nm", "--range", dest="range_nm", type=float_pair, required=True)
    p.add_argument("--step-nm", "--step", dest="step_nm", type=float, default=0.5)
    p.set_defaults(handler=cmd_polarizability_zeros)

    p = sub.add_parser("blockade-evolve", help="evolve the blocked branch (Omega-scaled units)")
    common(p, ("json", "csv"), "json")
    p.add_argument("--gamma-over-omega", type=float, default=0.0)
    p.add_argument("--delta-over-omega", type=float, default=0.0)
    p.add_argument("--omega-t", type=float, default=6.283185307179586)
    p.add_argument("--method", choices=("analytic", "rk4"), default="analytic")
    p.add_argument("--gate", action="store_true", help="emit the 2pi branch report instead")
    p.set_defaults(handler=cmd_blockade_evolve)

    p = sub.add_parser("blockade-curves", help="loss-probability curves")
    common(p, ("csv", "json"), "csv")
    p.add_argument("--gamma-over-omega", type=float_list, required=True)
    p.add_argument("--delta-over-omega", type=float_list, default=[0.0])
    p.add_argument("--t-max", type=float, default=6.283185307179586, help="largest Omega*t")
    p.add_argument("--n-points", type=int, default=201)
    p.set_defaults(handler=cmd_blockade_curves)

    p = sub.add_parser("register-run", help="apply a protocol document to a register")
    common(p)
    p.add_argument("--protocol", required=True)
    p.add_argument("--register", required=True)
    p.add_argument("--log", help="event log output (JSON lines)")
    p.add_argument("--shots", type=int, default=0, help="Monte Carlo loss draws")
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_register_run)

    p = sub.add_parser("compile", help="compile a circuit to a schedule")
    common(p)
    p.add_argument("--circuit", required=True)
    p.add_argument("--device", required=True)
    p.set_defaults(handler=cmd_compile)

    p = sub.add_parser("budget", help="fidelity budget of a schedule, or of idle storage")
    common(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--schedule")
    group.add_argument("--storage-duration-s", type=float)
    p.add_argument("--noise", help="noise model document (default: reference noise)")
    p.set_defaults(handler=cmd_budget)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        return args.handler(args)
    except ProtocolError as e:
        where = f" at op {e.op_index}" if e.op_index is not None else ""
        print(f"aeqsim: error{where}: {e}", file=sys.stderr)
        # ops applied before the failure are still logged
        if getattr(args, "log", None):
            write_output(event_lines(e.partial_log), args.log)
        return 1
    except (AeqsimError, ValidationError, OSError, json.JSONDecodeError, KeyError) as e:
        print(f"aeqsim: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
