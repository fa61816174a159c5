"""Position and herding debiasing on six-vote toy scenarios.

Three hand-pinned scenarios show what the fitted quality does that the
raw vote difference cannot:

  s1a  two answers, A always shown above B, three upvotes each.
       Same vote totals, but B earned its votes at the harder rank 2,
       so B's fitted quality ends up higher.
  s1b  the all-downvote mirror: a reader who scrolls down to rank 2 and
       still downvotes made a deliberate call, so B's downvotes weigh
       more and B's fitted quality ends up more negative than A's.
  s2   two answers at the same rank with the same final score of zero:
       A's votes ride the majority (+,+,+ then -,-,-), B's alternate.
       Votes that agree with a visible majority carry less information,
       so A's quality ends below B's.

Each scenario is refit on chronological prefixes, giving a
quality-over-time curve per answer.
"""

from cva.trainer import TOY_TICKS, toy_quality_curves

for name, story in [
    ("s1a", "three upvotes each; A pinned at rank 1, B at rank 2"),
    ("s1b", "three downvotes each; A pinned at rank 1, B at rank 2"),
    ("s2", "equal-rank answers, same final score, different sequences"),
]:
    print(f"\n=== {name}: {story} ===")
    rows = toy_quality_curves(name)
    answers = sorted({(r["question_id"], r["answer_id"]) for r in rows})
    header = "tick  " + "  ".join(f"{aid:>8}" for _, aid in answers)
    print(header)
    for tick in TOY_TICKS:
        cells = []
        for qid, aid in answers:
            match = [r for r in rows if r["tick"] == tick
                     and r["question_id"] == qid and r["answer_id"] == aid]
            cells.append(f"{match[0]['quality']:8.4f}" if match
                         else " " * 8)
        print(f"{tick:>4}  " + "  ".join(cells))
    final = {aid: r["quality"] for r in rows if r["tick"] == max(TOY_TICKS)
             for qid, aid in [(r["question_id"], r["answer_id"])]}
    verdict = max(final, key=final.get)
    print(f"highest final quality: {verdict} "
          f"({', '.join(f'{a}={v:.3f}' for a, v in sorted(final.items()))})")
