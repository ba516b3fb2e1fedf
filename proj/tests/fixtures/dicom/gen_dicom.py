#!/usr/bin/env python3
# Copyright 2026 The MGVO Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Hand-assembles the DICOM test fixtures byte by byte.

Deliberately shares no code with the C++ reader/writer. Rerun after editing:
    python3 gen_dicom.py
"""
import os
import struct

HERE = os.path.dirname(os.path.abspath(__file__))
HEADER = b"\0" * 128 + b"DICM"


def short(group, elem, vr, value):
    return struct.pack("<HH", group, elem) + vr + struct.pack("<H", len(value)) + value


def long_(group, elem, vr, value, length=None):
    n = len(value) if length is None else length
    return struct.pack("<HH", group, elem) + vr + b"\0\0" + struct.pack("<I", n) + value


def us(group, elem, v):
    return short(group, elem, b"US", struct.pack("<H", v))


SOP = short(0x0008, 0x0018, b"UI", b"1.2.3\0")


def pixels(rows, cols, nbytes=None):
    data = bytes((i * 7) & 0xFF for i in range(rows * cols * 2 if nbytes is None else nbytes))
    return (us(0x0028, 0x0010, rows) + us(0x0028, 0x0011, cols) + us(0x0028, 0x0100, 16),
            long_(0x7FE0, 0x0010, b"OW", data))


def write(name, data):
    with open(os.path.join(HERE, name), "wb") as f:
        f.write(data)


def main():
    write("minimal.dcm", HEADER + SOP)
    write("sex_f.dcm", HEADER + SOP + short(0x0010, 0x0040, b"CS", b"F "))

    geo, px = pixels(4, 4)
    sample = (HEADER + SOP
              + short(0x0008, 0x0020, b"DA", b"20030309")
              + short(0x0010, 0x0010, b"PN", b"DOE^JANE")
              + short(0x0010, 0x0020, b"LO", b"P-17")
              + short(0x0010, 0x0030, b"DA", b"19500310")
              + short(0x0010, 0x0040, b"CS", b"F ")
              + short(0x0020, 0x0062, b"CS", b"L ")
              + geo + px)
    write("sample.dcm", sample)

    bad = {}
    bad["01_empty"] = (b"", "MissingMagic")
    bad["02_short_preamble"] = (b"\0" * 100, "MissingMagic")
    bad["03_wrong_magic"] = (b"\0" * 128 + b"DICN" + SOP, "MissingMagic")
    bad["04_magic_at_zero"] = (b"DICM" + b"\0" * 128 + SOP, "MissingMagic")
    bad["05_vr_sq"] = (HEADER + SOP + short(0x0010, 0x0010, b"SQ", b"AB"), "UnsupportedVR")
    bad["06_vr_lowercase"] = (HEADER + short(0x0008, 0x0018, b"ui", b"1.2.3\0"), "UnsupportedVR")
    bad["07_header_cut"] = (HEADER + SOP + b"\x10\x00\x10\x00P", "Truncated")
    bad["08_value_cut"] = (HEADER + SOP + struct.pack("<HH", 0x10, 0x10) + b"PN" +
                           struct.pack("<H", 10) + b"DOE^", "Truncated")
    bad["09_ow_header_cut"] = (HEADER + SOP + struct.pack("<HH", 0x7FE0, 0x10) + b"OW\0\0\x20",
                               "Truncated")
    bad["10_pixels_cut"] = (HEADER + SOP + geo + long_(0x7FE0, 0x0010, b"OW", b"\0" * 16, 32),
                            "Truncated")
    bad["11_descending_tags"] = (HEADER + SOP + short(0x0010, 0x0020, b"LO", b"P1") +
                                 short(0x0010, 0x0010, b"PN", b"AB"), "NonMonotonicTag")
    bad["12_repeated_tag"] = (HEADER + SOP + short(0x0010, 0x0040, b"CS", b"F ") +
                              short(0x0010, 0x0040, b"CS", b"M "), "NonMonotonicTag")
    bad["13_group_order"] = (HEADER + short(0x0010, 0x0010, b"PN", b"AB") + SOP,
                             "NonMonotonicTag")
    geo_short, _ = pixels(4, 4)
    bad["14_pixels_too_short"] = (HEADER + SOP + geo_short +
                                  long_(0x7FE0, 0x0010, b"OW", b"\0" * 16), "PixelGeometryMismatch")
    bad["15_pixels_without_rows"] = (HEADER + SOP + us(0x0028, 0x0011, 2) + us(0x0028, 0x0100, 16) +
                                     long_(0x7FE0, 0x0010, b"OW", b"\0" * 8),
                                     "PixelGeometryMismatch")
    bad["16_bits_allocated_8"] = (HEADER + SOP + us(0x0028, 0x0010, 2) + us(0x0028, 0x0011, 2) +
                                  us(0x0028, 0x0100, 8) + long_(0x7FE0, 0x0010, b"OW", b"\0" * 8),
                                  "PixelGeometryMismatch")
    bad["17_no_sop_uid"] = (HEADER + short(0x0010, 0x0040, b"CS", b"F "), "InvariantViolation")
    bad["18_odd_length"] = (HEADER + SOP + short(0x0010, 0x0010, b"PN", b"ABC"),
                            "InvariantViolation")
    bad["19_sex_as_lo"] = (HEADER + SOP + short(0x0010, 0x0040, b"LO", b"F "),
                           "InvariantViolation")
    bad["20_undefined_length"] = (HEADER + SOP + long_(0x7FE0, 0x0010, b"OW", b"", 0xFFFFFFFF),
                                  "InvariantViolation")

    lines = []
    for name, (data, code) in sorted(bad.items()):
        write(os.path.join("malformed", name + ".dcm"), data)
        lines.append(f"{name}.dcm {code}")
    with open(os.path.join(HERE, "malformed", "expected.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
