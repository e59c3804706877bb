# Copyright 2026 The edgefuzz Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Tiny tensor library used as a fuzzing target in the edgefuzz tests.

Faults are planted on purpose; SEEDED_BUGS lists them. Everything else
rejects bad input with a Python exception.
"""

import builtins
import ctypes
import os

SEEDED_BUGS = {
    "mt.abs": "abort_signal",            # complex input aborts
    "mt.sum": "segfault",                # negative dim dereferences NULL
    "mt.reshape": "runtime_error_pattern",  # empty shape trips an internal assert
    "mt.mul": "inconsistent_output",     # gpu conjugates complex products
}

DEVICES = ("cpu", "gpu")


class Tensor:
    def __init__(self, data, device="cpu"):
        if device not in DEVICES:
            raise ValueError(f"unknown device {device!r}")
        if isinstance(data, (list, tuple)):
            self.data = list(data)
        else:
            self.data = [data]
        for x in self.data:
            if not isinstance(x, (int, float, complex)) or isinstance(x, bool):
                raise TypeError(f"unsupported element {x!r}")
        self.device = device

    @property
    def is_complex(self):
        return any(isinstance(x, complex) for x in self.data)

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"tensor({self.data}, device={self.device!r})"


def tensor(data, device="cpu"):
    return Tensor(data, device)


def to_list(value):
    """Flattens a result for the RESULT line; complex values become re, im."""
    if value is None:
        return []
    if isinstance(value, Tensor):
        items = value.data
    elif isinstance(value, (list, tuple)):
        items = value
    else:
        items = [value]
    out = []
    for x in items:
        if isinstance(x, complex):
            out.extend([x.real, x.imag])
        else:
            out.append(float(x))
    return out


def _tensor_arg(name, value):
    if not isinstance(value, Tensor):
        raise TypeError(f"{name} must be a Tensor, got {type(value).__name__}")


def _same_length(a, b):
    if len(a) != len(b):
        raise ValueError(f"size mismatch: {len(a)} vs {len(b)}")


def abs(input):
    _tensor_arg("input", input)
    if input.is_complex:
        os.abort()
    return Tensor([x if x >= 0 else -x for x in input.data], input.device)


def sum(input, dim):
    _tensor_arg("input", input)
    if not isinstance(dim, int):
        raise TypeError("dim must be an int")
    if dim < 0:
        # Unchecked negative index in the native reduction.
        ctypes.string_at(0)
    if dim > 0:
        raise IndexError(f"dim {dim} out of range for a 1-d tensor")
    return Tensor([builtins.sum(input.data)], input.device)


def reshape(input, shape):
    _tensor_arg("input", input)
    if not isinstance(shape, list):
        raise TypeError("shape must be a list")
    if not shape:
        raise RuntimeError(
            'INTERNAL ASSERT FAILED at "native/Shape.cpp":88, please report a bug')
    n = 1
    for s in shape:
        if not isinstance(s, int) or s < 0:
            raise ValueError(f"invalid shape entry {s!r}")
        n *= s
    if n != len(input):
        raise ValueError(f"shape {shape} is invalid for input of size {len(input)}")
    return Tensor(input.data, input.device)


def mul(input, other):
    _tensor_arg("input", input)
    _tensor_arg("other", other)
    _same_length(input, other)
    out = [a * b for a, b in zip(input.data, other.data)]
    if input.device == "gpu" and (input.is_complex or other.is_complex):
        out = [complex(v).conjugate() for v in out]
    return Tensor(out, input.device)


def add(input, other, alpha=1):
    _tensor_arg("input", input)
    _tensor_arg("other", other)
    if not isinstance(alpha, (int, float)) or isinstance(alpha, bool):
        raise TypeError("alpha must be a number")
    _same_length(input, other)
    return Tensor([a + alpha * b for a, b in zip(input.data, other.data)], input.device)


def clamp(input, min, max):
    _tensor_arg("input", input)
    if input.is_complex:
        raise TypeError("clamp does not support complex tensors")
    if min > max:
        raise ValueError("clamp: min must not exceed max")
    return Tensor([builtins.min(builtins.max(x, min), max) for x in input.data],
                  input.device)


def repeat(input, times):
    _tensor_arg("input", input)
    if not isinstance(times, int):
        raise TypeError("times must be an int")
    count = 0
    while count != times:  # never terminates for negative counts
        count += 1
    return Tensor(input.data * times, input.device)


def cross(input, other):
    _tensor_arg("input", input)
    _tensor_arg("other", other)
    if len(input) != 3 or len(other) != 3:
        raise ValueError("cross requires 3-element tensors")
    a, b = input.data, other.data
    return Tensor([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                   a[0] * b[1] - a[1] * b[0]], input.device)


def full(size, fill):
    if not isinstance(size, int) or size < 0:
        raise ValueError("full: size must be a non-negative int")
    return Tensor([float(fill)] * size)


_seed = 0


def manual_seed():
    global _seed
    _seed = 0
