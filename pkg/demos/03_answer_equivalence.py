"""Answer extraction and mathematical equivalence.

Competition answers arrive in many surface forms; votes are only counted
correctly if 1/sqrt(3) and sqrt(3)/3 land in the same bucket. Everything in
the supported grammar (rationals, square radicals, sums, products,
quotients, integer powers) reduces to one canonical form.

Run: python3 demos/03_answer_equivalence.py
"""

from idsampling import extract_final_answer, group_equivalent, parse_expr, try_parse
from idsampling.aggregation import Candidate, CandidateSet
from idsampling.checker import RawAnswer, opaque_key

print("Extraction takes the last boxed answer (revisions supersede):")
text = ("First attempt: the answer is \\boxed{1/2}.\n"
        "Wait! Maybe I made some mistakes! I need to rethink from scratch.\n"
        "Recomputing... the correct value is \\boxed{\\frac{\\sqrt{3}}{3}}.")
raw = extract_final_answer(text)
print(f"  span={raw.span!r} origin={raw.origin}\n")

print("Canonicalization collapses equivalent surface forms:")
for surface in ("1/sqrt(3)", "sqrt(3)/3", "\\frac{\\sqrt{3}}{3}", "sqrt(12)",
                "2/4", "0.5", "sqrt(2)+sqrt(8)", "(1+sqrt(2))^2", "2/(1+sqrt(3))"):
    print(f"  {surface:>22}  ->  {parse_expr(surface).render()}")

print("\nGrouping a candidate slate into equivalence classes:")
answers = ["1/2", "2/4", "sqrt(3)/3", "1/sqrt(3)", "0.5", "2/3", "no idea"]
candidates = []
for text in answers:
    expr = try_parse(text)
    candidates.append(Candidate(
        raw=RawAnswer(span=text, origin="boxed"),
        expr=expr,
        key=expr.render() if expr else opaque_key(text),
    ))
cset = CandidateSet(question_id="demo", question="?", candidates=tuple(candidates))
partition = group_equivalent(cset)
for members in partition.classes:
    print(f"  class {[answers[i] for i in members]}")
print(f"  ({partition.comparisons} pairwise checks for {len(answers)} candidates, "
      f"{len(partition.classes)} classes)")
