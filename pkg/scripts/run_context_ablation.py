#!/usr/bin/env python3
"""Context ablation on the lone-typist scenario.

Generates the scenario where one student types through a lecture while peers
listen (plus the twin where peers also type), classifies the target with the
deterministic baseline under both prompt variants, and prints the flip.
"""

import argparse

from engagekit.dataio import classroom_windows, generate_scenario, scenario_fig1
from engagekit.engagement import classify_baseline
from engagekit.temporal import aggregate_context


def verdicts_for(session, student_id):
    window = next(w for w in classroom_windows(session) if w.target.student_id == student_id)
    context = aggregate_context(window, bin_seconds=5)
    with_ctx = classify_baseline(window.target, context, session.dictionary)
    without = classify_baseline(window.target, None, session.dictionary)
    return with_ctx, without


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"{'scenario':<28}{'context-based':<16}{'context-free':<16}")
    for name, peers_typing in (("typist among listeners", False), ("typist among typists", True)):
        session = generate_scenario(scenario_fig1(args.seed, peers_typing=peers_typing))
        with_ctx, without = verdicts_for(session, "s00")
        print(f"{name:<28}{with_ctx.label.value:<16}{without.label.value:<16}")
    print("\nOnly the context-based run separates the two scenarios.")


if __name__ == "__main__":
    main()
