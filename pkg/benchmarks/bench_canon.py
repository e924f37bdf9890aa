"""Compare the compiled canonical encoder against the pure-Python one.

Both backends encode the same corpora; the script checks they produce
identical bytes, then times each and reports throughput and the ratio.

Usage: python benchmarks/bench_canon.py [--repeat N] [--number N]
"""

import argparse
import random
import statistics
import timeit
from decimal import Decimal

from atcpip import canon
from atcpip.canon import pure
from atcpip.scenario import scenario_from_bytes
from atcpip.scenarios import BUILTIN_SCENARIOS, builtin_bytes
from atcpip.sim import run_scenario

try:
    from atcpip.canon import _speedups
except ImportError:
    _speedups = None


def _random_terms_value(rng):
    return {
        "name": f"ip-{rng.randrange(10_000)}",
        "description": "weights and training notes",
        "scope": sorted(rng.sample(("personal", "commercial", "sublicensable"), 2)),
        "duration": rng.choice(("2030-01-01", "perpetual")),
        "jurisdiction": "US",
        "governing_law": "US",
        "royalty_rate": Decimal(rng.randrange(0, 10_000)) * Decimal("0.0001"),
        "transferability": "non_transferable",
        "revocation_conditions": ["dispute_loss"],
        "dispute_resolution": "onchain_arbitration",
        "onchain_enforcement": True,
        "offchain_enforcement": False,
        "compliance_requirements": ["gdpr"],
        "ip_restrictions": ["read_only", "no_training"],
        "chain_of_ownership": True,
        "rev_share": Decimal(rng.randrange(0, 10_000)) * Decimal("0.0001"),
        "upfront_fee": rng.randrange(0, 10**9),
    }


def _corpora():
    rng = random.Random(0xBE7C)
    ledgers = []
    transcripts = []
    for name in BUILTIN_SCENARIOS:
        transcript, world = run_scenario(scenario_from_bytes(builtin_bytes(name)))
        ledgers.extend(world.ledger.export_entries())
        transcripts.extend(canon.loads(line) for line in transcript.splitlines())
    return {
        "ledger entries": ledgers,
        "transcript lines": transcripts,
        "terms maps": [_random_terms_value(rng) for _ in range(500)],
        "scalars": [rng.randrange(-(10**12), 10**12) for _ in range(2_000)]
        + [Decimal(rng.randrange(-(10**8), 10**8)) * Decimal("0.0001") for _ in range(2_000)],
    }


def _time(encoder, corpus, repeat, number):
    def encode_all():
        for value in corpus:
            encoder(value)

    return min(timeit.repeat(encode_all, repeat=repeat, number=number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5, help="timing repeats (best wins)")
    parser.add_argument("--number", type=int, default=20, help="corpus passes per repeat")
    args = parser.parse_args(argv)

    if _speedups is None:
        parser.exit(1, "compiled extension not built; nothing to compare\n")

    corpora = _corpora()
    print(f"active backend: {canon.BACKEND}")
    print(f"{'corpus':<18} {'values':>7} {'bytes':>9} {'pure':>10} {'compiled':>10} {'ratio':>7}")
    ratios = []
    for label, corpus in corpora.items():
        blobs = [pure.dumps(value) for value in corpus]
        for value, blob in zip(corpus, blobs):
            if _speedups.dumps(value) != blob:
                raise SystemExit(f"backend disagreement on {label}: {value!r}")
        total = sum(len(blob) for blob in blobs)
        pure_s = _time(pure.dumps, corpus, args.repeat, args.number)
        fast_s = _time(_speedups.dumps, corpus, args.repeat, args.number)
        ratios.append(pure_s / fast_s)
        print(
            f"{label:<18} {len(corpus):>7} {total:>9}"
            f" {pure_s * 1e3:>8.2f}ms {fast_s * 1e3:>8.2f}ms"
            f" {pure_s / fast_s:>6.1f}x"
        )
    print(f"geometric mean speedup: {statistics.geometric_mean(ratios):.1f}x")


if __name__ == "__main__":
    main()
