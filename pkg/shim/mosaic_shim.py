#!/usr/bin/env python3
"""Candidate-chain runner.

Usage: ``mosaic_shim.py input.json`` (the input file path is the sole
argument). Loads the chain code in a fresh namespace, invokes each
evaluation case, compares numeric outputs under tolerances, and emits one
JSON record on stdout.

Wire schema, version 1:
  input  — {"v": 1, "code": str,
            "cases": [{"entry": str, "args": [value], "expected": value,
                       "rtol": num?, "atol": num?, "setup": str?}],
            "timeout_s": num}
           where value = {"kind": "scalar"|"array", "dtype": "float"|"int"|
           "complex"|"bool"|"string", "shape": [int], "data": [...]}
           (complex entries are [re, im] pairs)
  output — {"v": 1, "phase": "load"|"call"|"compare"|"none",
            "exception_type": str|null, "traceback": str,
            "case_results": [{"index": int, "pass": bool,
                              "deviation": num|"inf"|null}],
            "wall_ms": int}

The reported phase is the earliest failing one; cases that error before
comparison carry a null deviation. Exit code is 0 for every well-formed
record, candidate failures included; nonzero means the harness itself could
not read the input or emit a record.

The shim self-limits to timeout_s via SIGALRM (the engine's external
deadline is the backstop) and redirects candidate stdout to stderr so the
protocol channel stays clean. numpy is imported lazily: chains that die at
load never pay for it.
"""

from __future__ import annotations

import contextlib
import json
import math
import signal
import sys
import time
import traceback

WIRE_VERSION = 1
DEFAULT_RTOL = 1e-5
DEFAULT_ATOL = 1e-8
TRACEBACK_CAP = 16000

_NUMERIC_DTYPES = ("int", "float", "complex")


class ShimTimeout(BaseException):
    """Self-imposed time budget elapsed (BaseException so candidate
    ``except Exception`` blocks cannot swallow it)."""


# --------------------------------------------------------------------------
# Value decoding and comparison
# --------------------------------------------------------------------------

def _nest(flat, shape):
    if not shape:
        return flat[0]
    if len(shape) == 1:
        return list(flat)
    stride = 1
    for n in shape[1:]:
        stride *= n
    return [_nest(flat[i * stride:(i + 1) * stride], shape[1:])
            for i in range(shape[0])]


def decode_argument(obj):
    """Wire value record -> plain Python (scalar or nested lists)."""
    data = obj["data"]
    if obj["dtype"] == "complex":
        values = [complex(pair[0], pair[1]) for pair in data]
    else:
        values = list(data)
    if obj["kind"] == "scalar":
        return values[0]
    return _nest(values, list(obj.get("shape", [])))


def _dtype_family(dtype):
    if dtype in _NUMERIC_DTYPES:
        return "numeric"
    return dtype  # bool | string


def _expected_array(obj):
    import numpy as np

    dtype = obj["dtype"]
    shape = tuple(int(n) for n in obj.get("shape", ()))
    data = obj["data"]
    if dtype == "complex":
        arr = np.array([complex(p[0], p[1]) for p in data], dtype=complex)
    elif dtype == "float":
        arr = np.array(data, dtype=float)
    elif dtype == "int":
        arr = np.array(data, dtype=np.int64)
    elif dtype == "bool":
        arr = np.array(data, dtype=bool)
    elif dtype == "string":
        arr = np.array(data, dtype=object)
    else:
        raise ValueError(f"unknown dtype {dtype!r}")
    return arr.reshape(shape), _dtype_family(dtype)


def _actual_family(arr):
    kind = arr.dtype.kind
    if kind == "b":
        return "bool"
    if kind in "iufc":
        return "numeric"
    if kind in "US":
        return "string"
    return None


def compare_values(actual, expected, rtol=None, atol=None):
    """(pass, deviation) for a runtime value against a wire value record.

    Structural mismatch (kind/shape/dtype-family) gives (False, inf).
    Otherwise every element must satisfy |a-e| <= atol + rtol*|e| (complex
    via modulus); the deviation is max(|a-e| / max(|e|, 1)) either way.
    Total: never raises.
    """
    import numpy as np

    rtol = DEFAULT_RTOL if rtol is None else float(rtol)
    atol = DEFAULT_ATOL if atol is None else float(atol)
    try:
        exp_arr, family = _expected_array(expected)
    except Exception:
        return False, math.inf
    try:
        act = np.asarray(actual)
    except Exception:
        return False, math.inf
    if act.dtype.kind == "O":
        try:
            act = act.astype(complex)
        except (TypeError, ValueError):
            return False, math.inf
    if _actual_family(act) != family:
        return False, math.inf
    if tuple(act.shape) != tuple(exp_arr.shape):
        return False, math.inf

    if family == "string":
        ok = bool(np.all(act.astype(object) == exp_arr)) if act.size else True
        return ok, 0.0 if ok else math.inf

    if family == "bool":
        a = act.astype(np.int64)
        e = exp_arr.astype(np.int64)
    elif act.dtype.kind == "c" or exp_arr.dtype.kind == "c":
        a = act.astype(complex)
        e = exp_arr.astype(complex)
    else:
        a = act.astype(float)
        e = exp_arr.astype(float)

    if a.size == 0:
        return True, 0.0
    with np.errstate(invalid="ignore", over="ignore"):
        diff = np.abs(a - e)
        abs_e = np.abs(e)
        ok = bool(np.all(diff <= atol + rtol * abs_e))
        deviation = float(np.max(diff / np.maximum(abs_e, 1.0)))
    if math.isnan(deviation):
        deviation = math.inf
    return ok, deviation


# --------------------------------------------------------------------------
# Phased execution
# --------------------------------------------------------------------------

def _capped_tb():
    text = traceback.format_exc()
    if len(text) > TRACEBACK_CAP:
        text = text[-TRACEBACK_CAP:]
    return text


def run_record(record):
    """Execute one input record; returns the output record (total)."""
    code = record["code"]
    cases = record["cases"]
    timeout_s = float(record.get("timeout_s") or 0)
    started = time.monotonic()

    alarm_installed = False
    old_handler = None
    if timeout_s > 0 and hasattr(signal, "setitimer"):
        def _on_alarm(signum, frame):
            raise ShimTimeout()

        old_handler = signal.signal(signal.SIGALRM, _on_alarm)
        signal.setitimer(signal.ITIMER_REAL, timeout_s)
        alarm_installed = True

    phase = "none"
    exception_type = None
    tb_text = ""
    case_results = []
    returned = {}
    try:
        namespace = {"__name__": "<chain>"}
        try:
            with contextlib.redirect_stdout(sys.stderr):
                exec(compile(code, "<chain>", "exec"), namespace)
        except ShimTimeout:
            phase, exception_type = "load", "TimeoutError"
            tb_text = f"time budget of {timeout_s}s exceeded while loading the chain"
        except BaseException as exc:
            phase, exception_type = "load", type(exc).__name__
            tb_text = _capped_tb()

        if phase == "none":
            for i, case in enumerate(cases):
                try:
                    with contextlib.redirect_stdout(sys.stderr):
                        setup = case.get("setup")
                        if setup:
                            exec(setup, namespace)
                        entry = case.get("entry")
                        fn = namespace.get(entry)
                        if not callable(fn):
                            raise NameError(f"chain defines no callable named {entry!r}")
                        args = [decode_argument(a) for a in case.get("args", [])]
                        returned[i] = fn(*args)
                except ShimTimeout:
                    if phase == "none":
                        phase, exception_type = "call", "TimeoutError"
                        tb_text = (f"time budget of {timeout_s}s exceeded in case {i}")
                    case_results.append((i, False, None))
                    break  # no budget left for the remaining cases
                except BaseException as exc:
                    if phase == "none":
                        phase, exception_type = "call", type(exc).__name__
                        tb_text = _capped_tb()
                    case_results.append((i, False, None))

            for i in sorted(returned):
                try:
                    case = cases[i]
                    ok, deviation = compare_values(
                        returned[i], case["expected"],
                        case.get("rtol"), case.get("atol"),
                    )
                except BaseException:
                    ok, deviation = False, math.inf
                if not ok and phase == "none":
                    phase = "compare"
                case_results.append((i, ok, deviation))
    finally:
        if alarm_installed:
            signal.setitimer(signal.ITIMER_REAL, 0)
            signal.signal(signal.SIGALRM, old_handler)

    case_results.sort(key=lambda t: t[0])
    wall_ms = int((time.monotonic() - started) * 1000)
    return {
        "v": WIRE_VERSION,
        "phase": phase,
        "exception_type": exception_type,
        "traceback": tb_text,
        "case_results": [
            {"index": i, "pass": ok, "deviation": _encode_deviation(d)}
            for i, ok, d in case_results
        ],
        "wall_ms": wall_ms,
    }


def _encode_deviation(d):
    if d is None:
        return None
    if math.isinf(d):
        return "inf"
    return float(d)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    real_stdout = sys.stdout
    if len(argv) != 1:
        print("usage: mosaic_shim.py input.json", file=sys.stderr)
        return 2
    try:
        with open(argv[0], encoding="utf-8") as fh:
            record = json.load(fh)
    except (OSError, ValueError) as exc:
        print(f"harness fault: cannot read input record: {exc}", file=sys.stderr)
        return 2
    if (
        not isinstance(record, dict)
        or record.get("v") != WIRE_VERSION
        or not isinstance(record.get("code"), str)
        or not isinstance(record.get("cases"), list)
    ):
        print("harness fault: input does not match wire schema v1", file=sys.stderr)
        return 2
    output = run_record(record)
    json.dump(output, real_stdout)
    real_stdout.write("\n")
    real_stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
