"""Single-digit mutations of stored certificate numbers."""

from __future__ import annotations

import copy

import numpy as np

# payload fields that carry the inequalities of each proof
SIGN_CRITICAL = {
    "homoclinic": ("a_bracket", "frame_C", "h_left", "h_right", "q_left", "q_right", "decay_c",
                   "decay_xi", "cert_u", "cert_s", "membership", "endpoint_norms"),
    "separatrix": ("homoclinic", "block", "x_minus", "x_plus", "ratio_A", "Gamma", "base_final_local",
                   "eta_minus", "eta_plus", "config_backward", "config_forward"),
}


def _is_number(s) -> bool:
    if not isinstance(s, str):
        return False
    try:
        return np.isfinite(float(s))
    except ValueError:
        return False


def numeric_leaves(obj, path=()):
    """Paths of all numeric strings below ``obj``."""
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from numeric_leaves(v, path + (k,))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from numeric_leaves(v, path + (i,))
    elif _is_number(obj):
        yield path


def sign_critical_leaves(doc: dict) -> list[tuple]:
    p = doc["payload"]
    return [("payload", k) + rest for k in SIGN_CRITICAL[doc["kind"]] for rest in numeric_leaves(p[k])]


def _get(obj, path):
    for k in path:
        obj = obj[k]
    return obj


def _set(obj, path, value):
    _get(obj, path[:-1])[path[-1]] = value


def mutate_digit(s: str, rng: np.random.Generator) -> str:
    """Change one decimal digit of ``s`` so that the parsed double changes."""
    positions = [i for i, ch in enumerate(s) if ch.isdigit()]
    for _ in range(200):
        i = int(rng.choice(positions))
        d = int(s[i])
        new = s[:i] + str((d + int(rng.integers(1, 10))) % 10) + s[i + 1:]
        try:
            if float(new) != float(s) and np.isfinite(float(new)):
                return new
        except ValueError:
            continue
    raise ValueError(f"no value-changing digit mutation of {s!r}")


def mutated(doc: dict, path: tuple, rng: np.random.Generator) -> dict:
    out = copy.deepcopy(doc)
    _set(out, path, mutate_digit(_get(doc, path), rng))
    return out


# leaves that verify re-derives by recomputation, so edits are caught even
# without the digest; the rest (integration outputs) are bound by the digest
RECOMPUTED = {
    "homoclinic": (("a_bracket",), ("frame_C",), ("h_left",), ("h_right",), ("decay_c",), ("decay_xi",),
                   ("cert_u",), ("cert_s",), ("endpoint_norms",)),
    "separatrix": (("x_minus",), ("x_plus",), ("ratio_A",), ("eta_minus",), ("eta_plus",),
                   ("Gamma", "lo", 0), ("Gamma", "hi", 0),
                   ("homoclinic", "a_bracket"), ("homoclinic", "frame_C"), ("homoclinic", "decay_c"),
                   ("homoclinic", "decay_xi"), ("homoclinic", "endpoint_norms", 0, "hi"),
                   ("homoclinic", "endpoint_norms", 1, "hi"),
                   ("config_backward", "x_star"), ("config_backward", "c_b"),
                   ("config_backward", "lambda_decay"), ("config_backward", "a22"),
                   ("config_backward", "a33"), ("config_forward", "x_star"), ("config_forward", "c_b"),
                   ("config_forward", "lambda_decay"), ("config_forward", "a22"),
                   ("config_forward", "a33")),
}


def recomputed_leaves(doc: dict) -> list[tuple]:
    prefixes = RECOMPUTED[doc["kind"]]
    return [p for p in sign_critical_leaves(doc) if any(p[1:1 + len(q)] == q for q in prefixes)]
