"""Problem-file ingestion, serialization, and built-in instances.

Problem files are JSON with explicit axis-order declarations and row-major
flattened probability arrays, so the same file means the same tensor in any
implementation. The built-in instances cover a four-state binary channel
(Z / noiseless / crossover / S slices), the binary modulo-sum source, the
doubly symmetric binary source, and a switched binary-noise source.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .ba import ChannelInstance, SourceInstance
from .probability import Alphabet, CondKernel, JointPmf


class ProblemFileError(ValueError):
    """A problem file is malformed or inconsistent."""


BUILTIN_NAMES = ("example1", "example2", "example3", "example4")


def _z_channel(eps: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [eps, 1.0 - eps]])


def _s_channel(eps: float) -> np.ndarray:
    return np.array([[1.0 - eps, eps], [0.0, 1.0]])


def _bsc(eps: float) -> np.ndarray:
    return np.array([[1.0 - eps, eps], [eps, 1.0 - eps]])


def _noiseless() -> np.ndarray:
    return np.eye(2)


def example1_channel(eps: float = 0.1) -> ChannelInstance:
    """Binary channel whose behavior is selected by the state pair.

    (s1,s2) = (1,0): Z channel with crossover eps; (1,1): noiseless;
    (0,0): full crossover (both edges, a BSC with parameter eps);
    (0,1): S channel with crossover eps. States are correlated with
    P(s1=s2) = 0.2.
    """
    x = Alphabet(2, "X")
    y = Alphabet(2, "Y")
    s1 = Alphabet(2, "S1")
    s2 = Alphabet(2, "S2")
    state = JointPmf((s1, s2), np.array([[0.1, 0.4], [0.4, 0.1]]))
    slices = {
        (1, 0): _z_channel(eps),
        (1, 1): _noiseless(),
        (0, 0): _bsc(eps),
        (0, 1): _s_channel(eps),
    }
    kern = np.zeros((2, 2, 2, 2))  # (X, S1, S2, Y)
    for (a, b), mat in slices.items():
        kern[:, a, b, :] = mat
    return ChannelInstance(x, y, s1, s2, state, CondKernel((x, s1, s2), (y,), kern))


def example2_source() -> SourceInstance:
    """X = S1 xor S2 with S1, S2 i.i.d. uniform bits; Hamming distortion."""
    x = Alphabet(2, "X")
    xhat = Alphabet(2, "Xhat")
    s1 = Alphabet(2, "S1")
    s2 = Alphabet(2, "S2")
    joint = np.zeros((2, 2, 2))
    for a in range(2):
        for b in range(2):
            joint[a ^ b, a, b] = 0.25
    d = 1.0 - np.eye(2)
    return SourceInstance(x, xhat, s1, s2, JointPmf((x, s1, s2), joint), d)


def example3_source() -> SourceInstance:
    """Doubly symmetric binary source: X ~ Bernoulli(0.5), P(S != X) = 0.3.

    The side information S occupies the S2 axis; S1 is trivial.
    """
    x = Alphabet(2, "X")
    xhat = Alphabet(2, "Xhat")
    s1 = Alphabet(1, "S1")
    s2 = Alphabet(2, "S")
    joint = np.zeros((2, 1, 2))
    for a in range(2):
        for s in range(2):
            joint[a, 0, s] = 0.5 * (0.7 if s == a else 0.3)
    d = 1.0 - np.eye(2)
    return SourceInstance(x, xhat, s1, s2, JointPmf((x, s1, s2), joint), d)


def example4_source(p0: float = 0.3, p1: float = 0.001) -> SourceInstance:
    """Switched binary-noise source: X = S1 xor Z_{S2}, Z0 ~ B(p0), Z1 ~ B(p1)."""
    x = Alphabet(2, "X")
    xhat = Alphabet(2, "Xhat")
    s1 = Alphabet(2, "S1")
    s2 = Alphabet(2, "S2")
    noise = (p0, p1)
    joint = np.zeros((2, 2, 2))
    for a in range(2):
        for b in range(2):
            for xx in range(2):
                flip = noise[b]
                joint[xx, a, b] = 0.25 * (flip if xx != a else 1.0 - flip)
    d = 1.0 - np.eye(2)
    return SourceInstance(x, xhat, s1, s2, JointPmf((x, s1, s2), joint), d)


def builtin_instance(name: str, **params) -> ChannelInstance | SourceInstance:
    name = name.lower()
    if name == "example1":
        return example1_channel(eps=float(params.get("epsilon", 0.1)))
    if name == "example2":
        return example2_source()
    if name == "example3":
        return example3_source()
    if name == "example4":
        return example4_source(
            p0=float(params.get("p0", 0.3)), p1=float(params.get("p1", 0.001))
        )
    raise ProblemFileError(f"unknown builtin {name!r}; expected one of {BUILTIN_NAMES}")


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------


def _axis(alphabets: dict[str, int], name: str) -> Alphabet:
    if name not in alphabets:
        raise ProblemFileError(f"axis {name!r} missing from alphabets")
    return Alphabet(int(alphabets[name]), name.upper())


def _tensor(spec: dict, alphabets: dict[str, int], key: str, axes_key: str = "axes") -> tuple[list[str], np.ndarray]:
    if key not in spec:
        raise ProblemFileError(f"missing field {key!r}")
    entry = spec[key]
    names = entry.get(axes_key)
    flat = entry.get("probs", entry.get("values"))
    if names is None or flat is None:
        raise ProblemFileError(f"{key} must declare {axes_key!r} and a flat array")
    shape = tuple(int(alphabets[n]) for n in names)
    arr = np.asarray(flat, dtype=float)
    if arr.size != math.prod(shape):
        raise ProblemFileError(
            f"{key} has {arr.size} entries but the declared axes need {math.prod(shape)}"
        )
    return list(names), arr.reshape(shape)


def parse_problem(spec: dict | str) -> ChannelInstance | SourceInstance:
    """Build an instance from a problem dict, JSON string, or builtin token."""
    if isinstance(spec, str):
        text = spec.strip()
        if text.startswith("builtin:"):
            return builtin_instance(text.split(":", 1)[1])
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemFileError(f"invalid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise ProblemFileError("problem file must be a JSON object")
    if "builtin" in spec:
        params = {k: v for k, v in spec.items() if k not in ("builtin", "kind")}
        return builtin_instance(spec["builtin"], **params)

    kind = spec.get("kind")
    alphabets = spec.get("alphabets")
    if kind not in ("channel", "source") or not isinstance(alphabets, dict):
        raise ProblemFileError("problem file needs kind in {channel, source} and alphabets")
    try:
        if kind == "channel":
            x, yy = _axis(alphabets, "x"), _axis(alphabets, "y")
            s1, s2 = _axis(alphabets, "s1"), _axis(alphabets, "s2")
            names, joint = _tensor(spec, alphabets, "state_joint")
            if names != ["s1", "s2"]:
                raise ProblemFileError("state_joint axes must be ['s1', 's2']")
            entry = spec.get("kernel")
            if not entry:
                raise ProblemFileError("missing field 'kernel'")
            given = entry.get("given")
            out = entry.get("out")
            if given != ["x", "s1", "s2"] or out != ["y"]:
                raise ProblemFileError("kernel must declare given=['x','s1','s2'], out=['y']")
            arr = np.asarray(entry["probs"], dtype=float).reshape(
                x.size, s1.size, s2.size, yy.size
            )
            return ChannelInstance(
                x, yy, s1, s2, JointPmf((s1, s2), joint), CondKernel((x, s1, s2), (yy,), arr)
            )
        x, xh = _axis(alphabets, "x"), _axis(alphabets, "xhat")
        s1, s2 = _axis(alphabets, "s1"), _axis(alphabets, "s2")
        names, joint = _tensor(spec, alphabets, "joint")
        if names != ["x", "s1", "s2"]:
            raise ProblemFileError("joint axes must be ['x', 's1', 's2']")
        dnames, dmat = _tensor(spec, alphabets, "distortion")
        if dnames != ["x", "xhat"]:
            raise ProblemFileError("distortion axes must be ['x', 'xhat']")
        return SourceInstance(x, xh, s1, s2, JointPmf((x, s1, s2), joint), dmat)
    except ProblemFileError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ProblemFileError(f"malformed problem file: {exc}") from exc


def load_problem(path_or_token: str) -> ChannelInstance | SourceInstance:
    """Load a problem from 'builtin:NAME' or a JSON file path."""
    if path_or_token.startswith("builtin:"):
        return parse_problem(path_or_token)
    try:
        with open(path_or_token, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path_or_token}: {exc}") from exc
    return parse_problem(text)


def serialize_problem(instance: ChannelInstance | SourceInstance) -> dict[str, Any]:
    """Problem dict that round-trips through ``parse_problem`` bit-identically."""
    if isinstance(instance, ChannelInstance):
        return {
            "kind": "channel",
            "alphabets": {
                "x": instance.x.size,
                "y": instance.y.size,
                "s1": instance.s1.size,
                "s2": instance.s2.size,
            },
            "state_joint": {
                "axes": ["s1", "s2"],
                "probs": instance.state_joint.probs.ravel().tolist(),
            },
            "kernel": {
                "given": ["x", "s1", "s2"],
                "out": ["y"],
                "probs": instance.kernel.probs.ravel().tolist(),
            },
        }
    return {
        "kind": "source",
        "alphabets": {
            "x": instance.x.size,
            "xhat": instance.xhat.size,
            "s1": instance.s1.size,
            "s2": instance.s2.size,
        },
        "joint": {"axes": ["x", "s1", "s2"], "probs": instance.joint.probs.ravel().tolist()},
        "distortion": {
            "axes": ["x", "xhat"],
            "values": instance.distortion.ravel().tolist(),
        },
    }
