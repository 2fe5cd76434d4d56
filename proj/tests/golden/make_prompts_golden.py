#!/usr/bin/env python3
# Copyright 2026 The ageshift Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes prompts_v1.tsv from the prompt grammar tables, independently of the C++ code."""

import itertools
import sys

AGES = [0, 3, 4, 5, 10, 14, 15, 40, 64, 65, 80, 100]
TOKEN = "sks"

NOUNS = {
    # (lower bound, male, female); the last matching bound wins.
    True: [(0, "baby", "baby"), (5, "boy", "girl"), (15, "man", "woman"), (65, "elderly", "elderly")],
    False: [(0, "boy", "girl"), (5, "boy", "girl"), (15, "man", "woman"), (65, "man", "woman")],
}


def noun(age, gender, extreme):
    word = None
    for lower, male, female in NOUNS[extreme]:
        if age >= lower:
            word = male if gender == "male" else female
    return word


def phrase(age, hyphenated):
    return f"{age}-year-old" if hyphenated else f"{age} year old"


def rows():
    yield ["gender", "alpha_in", "alpha_tar", "hyphenated_age", "ref_age", "extreme_nouns",
           "p_ref", "p_reg", "p_in", "p_tar"]
    for gender in ("male", "female"):
        for hyph, ref, extreme in itertools.product((True, False), repeat=3):
            for i, age in enumerate(AGES):
                tar = AGES[(i + 1) % len(AGES)]
                p_ref = f"photo of {TOKEN} person"
                if ref:
                    p_ref += " as " + phrase(age, hyph)
                p_reg = "photo of person as " + phrase(age, hyph)
                p_in = f"photo of {TOKEN} {noun(age, gender, extreme)} as {phrase(age, hyph)}"
                p_tar = f"photo of {TOKEN} {noun(tar, gender, extreme)} as {phrase(tar, hyph)}"
                flags = ["1" if f else "0" for f in (hyph, ref, extreme)]
                yield [gender, str(age), str(tar), *flags, p_ref, p_reg, p_in, p_tar]


def main():
    out = open(sys.argv[1], "w", newline="\n") if len(sys.argv) > 1 else sys.stdout
    for row in rows():
        out.write("\t".join(row) + "\n")


if __name__ == "__main__":
    main()
