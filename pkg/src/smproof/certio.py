"""JSON certificates: serialization, loading and re-verification.

Floats are stored as ``%.17g`` strings, which round-trip binary64 exactly,
and intervals as ``{"lo": ..., "hi": ...}`` with nested lists for arrays.
A SHA-256 digest over the canonical payload detects any edit; independently
of the digest, :func:`verify` re-derives every stored inequality from the
payload alone (no integration is repeated).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

from .homoclinic import (
    C_TARGET,
    XI_TARGET,
    HomoclinicCertificate,
    HomoclinicSettings,
    endpoint_norms,
    h_from_local,
    in_block,
)
from .integrator import IntegratorSettings, TubeSegment
from .interval import Interval
from .manifold import (
    BlockSpec,
    ManifoldCertificate,
    RatePiece,
    _c_constant,
    certify_stable,
    certify_unstable,
    decay_product,
)
from .sepvalue import (
    RATIO_BOUND,
    SepConfig,
    SeparatrixCertificate,
    c_b_from_norm,
    check_backward,
    check_forward,
)
from .system import Frame, limit_eigendata, shimizu_field

__all__ = [
    "SCHEMA_VERSION",
    "CertificateFormatError",
    "dump_homoclinic",
    "dump_separatrix",
    "load_homoclinic",
    "read_document",
    "tube_of",
    "verify",
    "write_document",
]

SCHEMA_VERSION = 1


class CertificateFormatError(ValueError):
    """The document is not a certificate this version can read."""


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------


def _num(x) -> str:
    return "%.17g" % float(x)


def _enc(a: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 0:
        return _num(a)
    return [_enc(v) for v in a]


def enc_interval(x: Interval) -> dict:
    return {"lo": _enc(x.lo), "hi": _enc(x.hi)}


def dec_interval(obj) -> Interval:
    try:
        lo = np.array(obj["lo"], dtype=np.float64)
        hi = np.array(obj["hi"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateFormatError(f"bad interval {obj!r}") from exc
    if lo.shape != hi.shape or np.any(np.isnan(lo)) or np.any(lo > hi):
        raise CertificateFormatError(f"bad interval {obj!r}")
    return Interval(lo, hi)


def _dec_num(s) -> float:
    try:
        return float(s)
    except (TypeError, ValueError) as exc:
        raise CertificateFormatError(f"bad number {s!r}") from exc


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


def digest_of(payload: dict) -> str:
    return hashlib.sha256(_canonical(payload)).hexdigest()


def _document(kind: str, payload: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, "payload": payload,
            "digest": digest_of(payload)}


def write_document(path, doc: dict) -> None:
    """Atomic write: temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_document(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CertificateFormatError(f"cannot read certificate {path}: {exc}") from exc
    if not isinstance(doc, dict) or "payload" not in doc:
        raise CertificateFormatError("not a certificate document")
    return doc


# ---------------------------------------------------------------------------
# homoclinic
# ---------------------------------------------------------------------------


def _enc_spec(spec: BlockSpec) -> dict:
    return {"R": _num(spec.R), "L": _num(spec.L), "u_dim": spec.u_dim, "s_dim": spec.s_dim,
            "depth": spec.depth, "initial_cells": spec.initial_cells,
            "rate_cells": spec.rate_cells, "u_first": spec.u_first}


def _dec_frame(obj) -> Frame:
    """Frame from a stored point matrix of the form [[1, e, 0], [1, 1, 0], [0, 0, 1]]."""
    M = dec_interval(obj)
    pattern = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    mask = np.ones((3, 3), dtype=bool)
    mask[0, 1] = False
    if M.shape != (3, 3) or not M.is_point() or not np.array_equal(M.lo[mask], pattern[mask]):
        raise CertificateFormatError("frame_C must be a point matrix [[1, e, 0], [1, 1, 0], [0, 0, 1]]")
    return Frame.from_matrix(M)


def _dec_spec(obj: dict, frame: Frame) -> BlockSpec:
    return BlockSpec(frame, _dec_num(obj["R"]), _dec_num(obj["L"]), u_dim=int(obj["u_dim"]),
                     s_dim=int(obj["s_dim"]), depth=int(obj["depth"]),
                     initial_cells=int(obj["initial_cells"]), rate_cells=int(obj["rate_cells"]),
                     u_first=bool(obj["u_first"]))


def _enc_manifold(c: ManifoldCertificate) -> dict:
    return {
        "side": c.side,
        "spec": _enc_spec(c.spec),
        "params": enc_interval(c.params),
        "mu_arrow": enc_interval(c.mu_arrow),
        "xi_arrow": enc_interval(c.xi_arrow),
        "xi_graph": enc_interval(c.xi_graph),
        "c": enc_interval(c.c),
        "endpoint_enclosure": enc_interval(c.endpoint_enclosure),
        "branch": c.branch,
        "pieces": [{"params": enc_interval(p.params), "mu_arrow": enc_interval(p.mu_arrow),
                    "xi_arrow": enc_interval(p.xi_arrow), "xi_graph": enc_interval(p.xi_graph)}
                   for p in c.pieces],
    }


def _dec_manifold(obj: dict, frame: Frame) -> ManifoldCertificate:
    pieces = tuple(RatePiece(dec_interval(p["params"]), dec_interval(p["mu_arrow"]),
                             dec_interval(p["xi_arrow"]), dec_interval(p["xi_graph"]))
                   for p in obj["pieces"])
    return ManifoldCertificate(
        spec=_dec_spec(obj["spec"], frame), side=obj["side"], params=dec_interval(obj["params"]),
        mu_arrow=dec_interval(obj["mu_arrow"]), xi_arrow=dec_interval(obj["xi_arrow"]),
        xi_graph=dec_interval(obj["xi_graph"]), c=dec_interval(obj["c"]),
        endpoint_enclosure=dec_interval(obj["endpoint_enclosure"]), branch=int(obj["branch"]),
        pieces=pieces)


def _enc_settings(s) -> dict:
    out = {}
    for f in fields(s):
        v = getattr(s, f.name)
        if isinstance(v, IntegratorSettings):
            out[f.name] = _enc_settings(v)
        elif isinstance(v, bool) or v is None or isinstance(v, int):
            out[f.name] = v
        else:
            out[f.name] = _num(v)
    return out


def _dec_settings(cls, obj: dict):
    kw = {}
    for f in fields(cls):
        if f.name not in obj:
            continue
        v = obj[f.name]
        if f.name == "integrator":
            kw[f.name] = _dec_settings(IntegratorSettings, v)
        elif isinstance(v, str):
            kw[f.name] = float(v)
        else:
            kw[f.name] = v
    return cls(**kw)


def _enc_tube(tube) -> list:
    return [{"t": [_num(s.t_lo), _num(s.t_hi)], "box": enc_interval(s.box)} for s in tube]


def _dec_tube(obj) -> tuple[TubeSegment, ...]:
    return tuple(TubeSegment(_dec_num(s["t"][0]), _dec_num(s["t"][1]), dec_interval(s["box"]))
                 for s in obj)


def dump_homoclinic(cert: HomoclinicCertificate, include_tube: bool = True) -> dict:
    n0, nT = endpoint_norms(cert)
    if cert.endpoint_images is None:
        raise ValueError("the certificate lacks the endpoint images needed for re-verification")
    payload = {
        "a_bracket": enc_interval(cert.a_bracket),
        "T": _num(cert.T),
        "frame_C": enc_interval(cert.cert_u.spec.frame.matrix),
        "h_left": enc_interval(cert.h_left),
        "h_right": enc_interval(cert.h_right),
        "q_left": enc_interval(cert.endpoint_images[0]),
        "q_right": enc_interval(cert.endpoint_images[1]),
        "orientation": cert.orientation,
        "decay_c": enc_interval(cert.decay_c),
        "decay_xi": enc_interval(cert.decay_xi),
        "cert_u": _enc_manifold(cert.cert_u),
        "cert_s": _enc_manifold(cert.cert_s),
        "membership": [{"a": enc_interval(a), "q": enc_interval(q)} for a, q in cert.membership],
        "endpoint_enclosures": [enc_interval(cert.endpoint_enclosures[0]),
                                enc_interval(cert.endpoint_enclosures[1])],
        "endpoint_norms": [enc_interval(n0), enc_interval(nT)],
        "settings": _enc_settings(cert.settings),
        "tube": _enc_tube(cert.tube) if include_tube else [],
    }
    return _document("homoclinic", payload)


def load_homoclinic(doc: dict) -> HomoclinicCertificate:
    _check_kind(doc, "homoclinic")
    p = doc["payload"]
    try:
        settings = _dec_settings(HomoclinicSettings, p["settings"])
        frame = _dec_frame(p["frame_C"])
        return HomoclinicCertificate(
            a_bracket=dec_interval(p["a_bracket"]).reshape(()),
            h_left=dec_interval(p["h_left"]),
            h_right=dec_interval(p["h_right"]),
            T=_dec_num(p["T"]),
            decay_c=dec_interval(p["decay_c"]),
            decay_xi=dec_interval(p["decay_xi"]),
            endpoint_enclosures=(dec_interval(p["endpoint_enclosures"][0]),
                                 dec_interval(p["endpoint_enclosures"][1])),
            orientation=p["orientation"],
            settings=settings,
            cert_u=_dec_manifold(p["cert_u"], frame),
            cert_s=_dec_manifold(p["cert_s"], frame),
            membership=tuple((dec_interval(m["a"]), dec_interval(m["q"])) for m in p["membership"]),
            endpoint_images=(dec_interval(p["q_left"]), dec_interval(p["q_right"])),
            tube=_dec_tube(p.get("tube", [])),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise CertificateFormatError(f"incomplete homoclinic certificate: {exc!r}") from exc


def _check_kind(doc: dict, kind: str) -> None:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CertificateFormatError(f"unsupported schema version {doc.get('schema_version')!r}")
    if doc.get("kind") != kind:
        raise CertificateFormatError(f"expected a {kind} certificate, got {doc.get('kind')!r}")


def _same(a: Interval, b: Interval) -> bool:
    return a.shape == b.shape and bool(np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi))


def _verify_homoclinic(cert: HomoclinicCertificate, p: dict, deep: bool) -> list[str]:
    bad: list[str] = []
    A = cert.a_bracket
    if not A.lo < A.hi:
        bad.append("bracket-order")
    frame = cert.cert_u.spec.frame
    if not (_same(frame.matrix, cert.cert_s.spec.frame.matrix)
            and frame.residual().contains(np.eye(3)).all()):
        bad.append("frame")
    su, ss = cert.cert_u.spec, cert.cert_s.spec
    if any(getattr(ss, k) != getattr(su.swapped(), k)
           for k in ("R", "L", "u_dim", "s_dim", "depth", "initial_cells", "rate_cells", "u_first")):
        bad.append("cert_s: spec")
    for name, c in (("cert_u", cert.cert_u), ("cert_s", cert.cert_s)):
        bad += [f"{name}: {b}" for b in c.reverify()]
        if not _same(c.params, A.reshape(1)):
            bad.append(f"{name}: parameter cover")
        if not _same(c.c, _c_constant(c.spec.L)):
            bad.append(f"{name}: c-recompute")
    # shooting function values and their signs
    q_l, q_r = cert.endpoint_images
    for side, q, h in (("left", q_l, cert.h_left), ("right", q_r, cert.h_right)):
        if not in_block(q, cert.cert_u.spec):
            bad.append(f"q-{side}-in-block")
        if not _same(h_from_local(q, cert.cert_s), h):
            bad.append(f"h-{side}-recompute")
    if cert.orientation == "left-positive":
        signs = cert.h_left.lo > 0 and cert.h_right.hi < 0
    elif cert.orientation == "left-negative":
        signs = cert.h_left.hi < 0 and cert.h_right.lo > 0
    else:
        signs = False
    if not signs:
        bad.append("h-signs")
    # Φ_T(p^u_a) ∈ D for every a in the bracket
    pieces = [a for a, _ in cert.membership]
    if not pieces or float(pieces[0].lo) != float(A.lo) or float(pieces[-1].hi) != float(A.hi) or any(
            float(pieces[i].hi) != float(pieces[i + 1].lo) for i in range(len(pieces) - 1)):
        bad.append("membership-cover")
    for i, (_, q) in enumerate(cert.membership):
        if not in_block(q, cert.cert_u.spec):
            bad.append(f"membership-in-block[{i}]")
    # decay constants
    c = decay_product(cert.cert_u.c, frame)
    if not _same(c, cert.decay_c):
        bad.append("decay-c-recompute")
    if not cert.decay_c.hi < C_TARGET:
        bad.append("decay-c < 3.5")
    xi = Interval(min(float(cert.cert_u.xi_graph.lo), float(cert.cert_s.xi_graph.lo)))
    if not _same(xi, cert.decay_xi):
        bad.append("decay-xi-recompute")
    if not cert.decay_xi.lo >= XI_TARGET:
        bad.append("decay-xi >= 1 - 1e-4")
    n0, nT = endpoint_norms(cert)
    if not (_same(n0, dec_interval(p["endpoint_norms"][0])) and _same(nT, dec_interval(p["endpoint_norms"][1]))):
        bad.append("endpoint-norms")
    if deep:
        # re-run block and rate verification (no integration involved)
        f = shimizu_field(A)
        s = cert.settings
        try:
            u = certify_unstable(f, cert.cert_u.spec, branch=cert.cert_u.branch,
                                 n_pieces=len(cert.cert_u.pieces) or 1)
            st = certify_stable(f, cert.cert_u.spec, n_pieces=len(cert.cert_s.pieces) or s.stable_pieces)
        except Exception as exc:  # any refusal is a verification failure
            bad.append(f"rates-recompute: {exc}")
        else:
            for name, new, old in (("cert_u", u, cert.cert_u), ("cert_s", st, cert.cert_s)):
                for attr in ("mu_arrow", "xi_arrow", "xi_graph", "endpoint_enclosure"):
                    if not _same(getattr(new, attr), getattr(old, attr)):
                        bad.append(f"{name}: {attr}-recompute")
                if len(new.pieces) != len(old.pieces) or not all(
                        _same(getattr(a, k), getattr(b, k))
                        for a, b in zip(new.pieces, old.pieces)
                        for k in ("params", "mu_arrow", "xi_arrow", "xi_graph")):
                    bad.append(f"{name}: pieces-recompute")
    return bad


# ---------------------------------------------------------------------------
# separatrix
# ---------------------------------------------------------------------------


def _enc_config(c: SepConfig) -> dict:
    return {"x_star": enc_interval(c.x_star), "rho": _num(c.rho), "r": _num(c.r),
            "c_b": enc_interval(c.c_b), "lambda_decay": enc_interval(c.lambda_decay),
            "a22": enc_interval(c.a22), "a33": enc_interval(c.a33), "t_star": _num(c.t_star),
            "t_star_star": _num(c.t_star_star), "T_flight": _num(c.T_flight)}


def _dec_config(o: dict) -> SepConfig:
    return SepConfig(dec_interval(o["x_star"]), _dec_num(o["rho"]), _dec_num(o["r"]),
                     dec_interval(o["c_b"]), dec_interval(o["lambda_decay"]), dec_interval(o["a22"]),
                     dec_interval(o["a33"]), t_star=_dec_num(o["t_star"]),
                     t_star_star=_dec_num(o["t_star_star"]), T_flight=_dec_num(o["T_flight"]))


def dump_separatrix(cert: SeparatrixCertificate, hom_doc: dict, include_tube: bool = True) -> dict:
    hp = hom_doc["payload"]
    payload = {
        "homoclinic_digest": hom_doc["digest"],
        "homoclinic": {k: hp[k] for k in ("a_bracket", "T", "frame_C", "decay_c", "decay_xi", "endpoint_norms")},
        "block": hp["cert_u"]["spec"],
        "x_minus": enc_interval(cert.x_minus),
        "x_plus": enc_interval(cert.x_plus),
        "ratio_A": enc_interval(cert.ratio_A),
        "Gamma": enc_interval(cert.Gamma),
        "base_final_local": enc_interval(cert.base_final_local),
        "eta_minus": enc_interval(cert.eta_minus),
        "eta_plus": enc_interval(cert.eta_plus),
        "config_backward": _enc_config(cert.config_backward),
        "config_forward": _enc_config(cert.config_forward),
        "gamma_tube": _enc_tube(cert.gamma_tube) if include_tube else [],
        "eta_tube": _enc_tube(cert.eta_tube) if include_tube else [],
    }
    return _document("separatrix", payload)


def load_separatrix(doc: dict) -> SeparatrixCertificate:
    _check_kind(doc, "separatrix")
    p = doc["payload"]
    try:
        return SeparatrixCertificate(
            x_minus=dec_interval(p["x_minus"]), x_plus=dec_interval(p["x_plus"]),
            ratio_A=dec_interval(p["ratio_A"]), config_backward=_dec_config(p["config_backward"]),
            config_forward=_dec_config(p["config_forward"]), Gamma=dec_interval(p["Gamma"]),
            base_final_local=dec_interval(p["base_final_local"]), eta_minus=dec_interval(p["eta_minus"]),
            eta_plus=dec_interval(p["eta_plus"]),
            a_bracket=dec_interval(p["homoclinic"]["a_bracket"]).reshape(()),
            gamma_tube=_dec_tube(p.get("gamma_tube", [])), eta_tube=_dec_tube(p.get("eta_tube", [])))
    except (KeyError, TypeError, IndexError) as exc:
        raise CertificateFormatError(f"incomplete separatrix certificate: {exc!r}") from exc


def _verify_separatrix(cert: SeparatrixCertificate, p: dict) -> list[str]:
    bad = list(cert.reverify())
    h = p["homoclinic"]
    a0 = dec_interval(h["a_bracket"]).reshape(())
    decay_c = dec_interval(h["decay_c"])
    xi = dec_interval(h["decay_xi"])
    lam = Interval(float(xi.lo))
    if not xi.lo == xi.hi:
        bad.append("decay-xi-point")
    n0, nT = dec_interval(h["endpoint_norms"][0]), dec_interval(h["endpoint_norms"][1])
    cb, cf = cert.config_backward, cert.config_forward
    try:
        if not _same(c_b_from_norm(a0, decay_c, n0), cb.c_b):
            bad.append("c_b-backward-recompute")
        if not _same(c_b_from_norm(a0, decay_c, nT), cf.c_b):
            bad.append("c_b-forward-recompute")
    except Exception as exc:
        bad.append(f"c_b: {exc}")
    for name, cfg in (("backward", cb), ("forward", cf)):
        if not (_same(cfg.lambda_decay, lam) and _same(cfg.a22, a0 + 2.0) and _same(cfg.a33, a0)):
            bad.append(f"{name}-constants")
    if not _same(as_point(cf.x_star), as_point(cert.Gamma[0])):
        bad.append("forward-anchor")
    spec = _dec_spec(p["block"], _dec_frame(h["frame_C"]))
    if not _same(decay_product(_c_constant(spec.L), spec.frame), decay_c):
        bad.append("decay-c-recompute")
    if not in_block(cert.base_final_local, spec):
        bad.append("re-entry")
    v0 = limit_eigendata(a0).eigenvectors[:, 0]
    if not (_same(cert.x_minus * v0, cert.eta_minus) and _same(cert.x_plus * v0, cert.eta_plus)):
        bad.append("eta-limits")
    if not (cert.ratio_A.lo > 0 and cert.ratio_A.hi < RATIO_BOUND):
        bad.append("maincheck")
    if not check_backward(cb):
        bad.append("backward-admissible")
    if not check_forward(cf, cert.Gamma[0]):
        bad.append("forward-admissible")
    return sorted(set(bad))


def as_point(x: Interval) -> Interval:
    return x.reshape(())


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def verify(doc: dict, deep: bool = True, check_digest: bool = True) -> list[str]:
    """Names of failed checks (empty list: the certificate verifies)."""
    bad: list[str] = []
    if doc.get("schema_version") != SCHEMA_VERSION:
        return [f"schema_version {doc.get('schema_version')!r}"]
    if check_digest and doc.get("digest") != digest_of(doc.get("payload", {})):
        bad.append("digest")
    kind = doc.get("kind")
    try:
        if kind == "homoclinic":
            cert = load_homoclinic(doc)
            bad += _verify_homoclinic(cert, doc["payload"], deep)
        elif kind == "separatrix":
            cert = load_separatrix(doc)
            bad += _verify_separatrix(cert, doc["payload"])
        else:
            bad.append(f"kind {kind!r}")
    except (CertificateFormatError, ValueError, ArithmeticError) as exc:
        bad.append(f"format: {exc}")
    return bad


def tube_of(doc: dict) -> tuple[list[TubeSegment], list[str]]:
    """Tube segments stored in a certificate and the CSV column names."""
    p = doc["payload"]
    if doc.get("kind") == "homoclinic":
        return list(_dec_tube(p["tube"])), ["X", "Y", "Z"]
    if doc.get("kind") == "separatrix":
        gamma = _dec_tube(p["gamma_tube"])
        eta = _dec_tube(p["eta_tube"])
        segs = [TubeSegment(g.t_lo, g.t_hi, Interval.concatenate([g.box, e.box[3:6]]))
                for g, e in zip(gamma, eta)]
        return segs, ["X", "Y", "Z", "g1", "g2", "g3", "eta1", "eta2", "eta3"]
    raise CertificateFormatError(f"no tube in a {doc.get('kind')!r} document")
