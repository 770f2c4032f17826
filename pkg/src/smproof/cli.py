"""Command line driver: ``python -m smproof <command>``.

Exit codes: 0 success, 1 usage/config/format error, 2 the shooting signs do
not resolve, 3 an enclosure or certification stage failed, 4 a certificate
does not re-verify, 5 an admissibility inequality of the separatrix stage
failed.  Every run keeps ``status.json`` in the output directory; it reads
``"certified": true`` only after all certificates of the run are written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from .certio import (
    CertificateFormatError,
    dump_homoclinic,
    dump_separatrix,
    load_homoclinic,
    read_document,
    tube_of,
    verify,
    write_document,
)
from .config import ConfigError, ProofConfig, load_config
from .homoclinic import DecayCheckFailed, ImageEscapedBlock, SignNotResolved, prove_homoclinic
from .integrator import EnclosureFailure, write_tube_csv
from .manifold import CertificateRefused
from .sepvalue import AdmissibilityFailed, compute_separatrix

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SIGN = 2
EXIT_ENCLOSURE = 3
EXIT_VERIFY = 4
EXIT_ADMISSIBILITY = 5

# witnesses of the backward check that mean the drift bound on x fails
_LINK_WITNESSES = {"r-threshold", "rho-t-r-link"}


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Status:
    """status.json kept current (atomically) during a run."""

    def __init__(self, out: Path, command: str):
        self.path = out / "status.json"
        self.data = {"command": command, "state": "running", "certified": False, "stages": {},
                     "outputs": [], "exit_code": None, "message": ""}
        self._write()

    def stage(self, name: str, state: str) -> None:
        self.data["stages"][name] = state
        self._write()

    def output(self, path: Path) -> None:
        self.data["outputs"].append(path.name)
        self._write()

    def finish(self, code: int, message: str = "") -> None:
        self.data["exit_code"] = code
        self.data["message"] = message
        self.data["state"] = "certified" if code == EXIT_OK else "failed"
        self.data["certified"] = code == EXIT_OK
        self._write()

    def interrupted(self) -> None:
        self.data["state"] = "interrupted"
        self.data["certified"] = False
        self._write()

    def _write(self) -> None:
        _atomic_text(self.path, json.dumps(self.data, indent=1, sort_keys=True) + "\n")


def _atomic_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.chmod(tmp, 0o644)
    os.replace(tmp, path)


def _atomic_csv(path: Path, tube, names) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    os.close(fd)
    try:
        write_tube_csv(tmp, tube, names)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _config(args) -> ProofConfig:
    return load_config(args.config) if args.config else ProofConfig()


def _out_dir(args, cfg: ProofConfig) -> Path:
    out = args.out or cfg.out or "."
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _run_homoclinic(cfg: ProofConfig, out: Path, status: _Status) -> dict:
    status.stage("homoclinic", "running")
    try:
        cert = prove_homoclinic(cfg.bracket(), cfg.homoclinic_settings())
    except SignNotResolved as exc:
        status.stage("homoclinic", "failed")
        raise _Failure(EXIT_SIGN, f"homoclinic stage, shooting signs: {exc}") from exc
    except (EnclosureFailure, ImageEscapedBlock, CertificateRefused, DecayCheckFailed) as exc:
        status.stage("homoclinic", "failed")
        raise _Failure(EXIT_ENCLOSURE, f"homoclinic stage, {type(exc).__name__}: {exc}") from exc
    doc = dump_homoclinic(cert)
    path = out / "homoclinic.json"
    write_document(path, doc)
    status.output(path)
    tube_path = out / "homoclinic_tube.csv"
    _atomic_csv(tube_path, cert.tube, ["X", "Y", "Z"])
    status.output(tube_path)
    status.stage("homoclinic", "certified")
    print(f"homoclinic: h(a_l) = {cert.h_left}, h(a_r) = {cert.h_right} ({cert.orientation})")
    return doc


def _run_separatrix(cfg: ProofConfig, hom_doc: dict, out: Path, status: _Status) -> dict:
    status.stage("separatrix", "running")
    failed = verify(hom_doc)
    if failed:
        status.stage("separatrix", "failed")
        raise _Failure(EXIT_VERIFY, f"homoclinic certificate does not verify: {', '.join(failed)}")
    hom = load_homoclinic(hom_doc)
    try:
        cert = compute_separatrix(hom, cfg.sep_settings())
    except AdmissibilityFailed as exc:
        status.stage("separatrix", "failed")
        msg = f"separatrix stage: {exc.condition} violated"
        if exc.condition in _LINK_WITNESSES:
            msg = f"separatrix stage: rho-t-r-link violated ({exc.condition}); {exc.detail}"
        raise _Failure(EXIT_ADMISSIBILITY, msg) from exc
    except EnclosureFailure as exc:
        status.stage("separatrix", "failed")
        raise _Failure(EXIT_ENCLOSURE, f"separatrix stage, integration: {exc}") from exc
    doc = dump_separatrix(cert, hom_doc)
    path = out / "separatrix.json"
    write_document(path, doc)
    status.output(path)
    segs, names = tube_of(doc)
    tube_path = out / "separatrix_tube.csv"
    _atomic_csv(tube_path, segs, names)
    status.output(tube_path)
    status.stage("separatrix", "certified")
    print(f"separatrix: x_- in {cert.x_minus}, x_+ in {cert.x_plus}, A in {cert.ratio_A}")
    return doc


def _with_status(out: Path, command: str, body) -> int:
    status = _Status(out, command)
    try:
        body(status)
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        status.finish(exc.code, str(exc))
        return exc.code
    except KeyboardInterrupt:
        status.interrupted()
        raise
    status.finish(EXIT_OK)
    return EXIT_OK


def cmd_prove_homoclinic(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    return _with_status(out, "prove-homoclinic", lambda st: _run_homoclinic(cfg, out, st))


def cmd_prove_separatrix(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    hom_doc = read_document(args.homoclinic)
    return _with_status(out, "prove-separatrix", lambda st: _run_separatrix(cfg, hom_doc, out, st))


def cmd_full(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)

    def body(st):
        hom_doc = _run_homoclinic(cfg, out, st)
        _run_separatrix(cfg, hom_doc, out, st)

    return _with_status(out, "full", body)


def cmd_verify(args) -> int:
    doc = read_document(args.certificate)
    failed = verify(doc, deep=not args.shallow)
    if failed:
        for name in failed:
            print(f"FAIL {name}")
        return EXIT_VERIFY
    print(f"OK {doc.get('kind')} certificate {doc.get('digest')}")
    return EXIT_OK


def cmd_export_tube(args) -> int:
    doc = read_document(args.certificate)
    segs, names = tube_of(doc)
    if not segs:
        print("error: the certificate stores no tube", file=sys.stderr)
        return EXIT_USAGE
    _atomic_csv(Path(args.csv), segs, names)
    print(f"wrote {len(segs)} segments to {args.csv}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smproof", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    h = sub.add_parser("prove-homoclinic", help="bracket the homoclinic parameter")
    h.add_argument("--config")
    h.add_argument("--out")
    h.set_defaults(func=cmd_prove_homoclinic)
    s = sub.add_parser("prove-separatrix", help="bound the separatrix value")
    s.add_argument("--config")
    s.add_argument("--homoclinic", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_prove_separatrix)
    f = sub.add_parser("full", help="run both stages")
    f.add_argument("--config")
    f.add_argument("--out")
    f.set_defaults(func=cmd_full)
    v = sub.add_parser("verify", help="re-check a certificate from its JSON")
    v.add_argument("certificate")
    v.add_argument("--shallow", action="store_true", help="skip re-running the block and rate checks")
    v.set_defaults(func=cmd_verify)
    e = sub.add_parser("export-tube", help="write the stored enclosure tube as CSV")
    e.add_argument("certificate")
    e.add_argument("--csv", required=True)
    e.set_defaults(func=cmd_export_tube)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, CertificateFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
