#!/usr/bin/env python3
"""Expected per-race bias and sd values for the two-race fixture in
tests/support.hpp, evaluated with mpmath at 50 digits."""
import json
import sys

from mpmath import mp, mpf, log, exp, sqrt

mp.dps = 50

votes = [(550000, 450000), (490000, 510000)]
v = [mpf(r) / (r + d) for r, d in votes]
margin_group = []
for r, d in votes:
    m = 100 * mpf(r - d) / (r + d)
    margin_group.append(1 if abs(m) <= 6 else (0 if m > 0 else 2))

# (race, t, n, house)
polls = [(0, mpf("0.2"), 800, 0), (0, mpf("0.6"), 600, None), (1, mpf(0), 1000, 0)]
alpha1 = [mpf("0.05"), mpf("-0.03")]
beta1 = [mpf("0.1"), mpf("-0.2")]
tau1_sq = [mpf("4e-4"), mpf("1e-4")]
alpha2 = [mpf("0.06"), mpf("0.08")]
gamma = [mpf("0.3"), mpf("1.1"), mpf("-0.4")]
kappa = [mpf("0.07")]


def logit(p):
    return log(p / (1 - p))


def inv_logit(x):
    return 1 / (1 + exp(-x))


def predictor(i, kind):
    r, t, n, h = polls[i]
    und = -10 * alpha2[r] * gamma[margin_group[r]]
    k = kappa[h] if h is not None else 0
    eta = logit(v[r])
    if kind == "all":
        eta += alpha1[r] + t * beta1[r] + und + k
    elif kind == "election_day":
        eta += alpha1[r] + und + k
    elif kind == "undecided":
        eta += und
    elif kind == "house":
        eta += k
    return inv_logit(eta)


out = {"races": {}, "averages": {}}
kinds = ["all", "election_day", "undecided", "house"]
per_kind = {k: [] for k in kinds}
sds = []
for r in range(2):
    members = [i for i, p in enumerate(polls) if p[0] == r]
    entry = {}
    for k in kinds:
        b = 100 * sum(predictor(i, k) - v[r] for i in members) / len(members)
        entry[k] = float(b)
        per_kind[k].append(b)
    sd = 100 * sum(
        sqrt(predictor(i, "all") * (1 - predictor(i, "all")) / polls[i][2] + tau1_sq[r])
        for i in members) / len(members)
    entry["sigma"] = float(sd)
    sds.append(sd)
    out["races"][str(r)] = entry
for k in kinds:
    out["averages"][k] = float(sum(abs(b) for b in per_kind[k]) / 2)
out["averages"]["sigma"] = float(sum(sds) / 2)
housed = [i for i, p in enumerate(polls) if p[3] == 0]
out["house_bias"] = float(
    100 * sum(inv_logit(logit(v[polls[i][0]]) + kappa[0]) - v[polls[i][0]] for i in housed)
    / len(housed))

json.dump(out, sys.stdout, indent=2)
sys.stdout.write("\n")
