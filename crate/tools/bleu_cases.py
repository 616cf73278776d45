"""Reference corpus-BLEU values for the frozen cases in crates/core/tests/bleu_oracle.rs.

Scored with sacrebleu 2.4.3: no tokenization, no smoothing, single reference.
Run: python3 tools/bleu_cases.py
"""
import json

import sacrebleu

CASES = [
    (["the cat sat on the mat"], ["the cat is on the mat"]),
    (["the cat is on the mat"], ["the cat is on the mat"]),
    (["a b c d e f"], ["f e d c b a"]),
    (["the the the the the the the"], ["the cat is on the mat"]),
    (["the cat"], ["the cat is on the mat"]),
    (["the cat is on the mat today and tomorrow"], ["the cat is on the mat"]),
    (["a b c d", "e f g h i"], ["a b c d", "e f g x i"]),
    (["one two three four five", "six seven eight nine ten"],
     ["one two three four five", "ten nine eight seven six"]),
    (["x y z w", "p q r s t u"], ["x y z w v", "p q r s t"]),
    (["it is a guide to action which ensures that the military always obeys the commands of the party"],
     ["it is a guide to action that ensures that the military will forever heed party commands"]),
    (["he read the book because he was interested in world history",
      "the cat sat on the mat"],
     ["he was interested in world history because he read the book",
      "the cat is on the mat"]),
    (["a a a a b b b b"], ["a a b b a a b b"]),
    (["ein hund läuft über die straße", "zwei männer spielen fußball"],
     ["ein hund rennt über die straße", "zwei männer spielen fußball ."]),
    (["1 2 3 4 5 6 7 8 9 10"], ["1 2 3 4 5 6 7 8 9 10 11 12"]),
    (["w1 w2 w3 w4", "w5 w6", "w7 w8 w9 w10 w11"], ["w1 w2 w3 w4", "w5 w6 w7", "w7 w8 w9 w10 w12"]),
    (["the quick brown fox jumps over the lazy dog", "and runs away fast"],
     ["the quick brown fox jumped over the lazy dog", "and ran away quickly"]),
    (["a b c d e", "a b c d e"], ["a b c d e", "a b c d f"]),
    (["t1 t2 t3 t4 t5 t6 t7 t8", "", "t9 t10 t11 t12"], ["t1 t2 t3 t4 t5 t6 t7 t8", "t0", "t9 t10 t11 t12"]),
    (["red green blue red green blue red green"], ["red green blue red green blue"]),
    (["x . y . z . w"], ["x . y . z . w ."]),
]


def main():
    out = []
    for hyps, refs in CASES:
        b = sacrebleu.corpus_bleu(hyps, [refs], tokenize="none", smooth_method="none", force=True)
        out.append({
            "hyps": hyps,
            "refs": refs,
            "bleu": round(b.score, 6),
            "precisions": [round(p, 6) for p in b.precisions],
            "bp": round(b.bp, 6),
            "sys_len": b.sys_len,
            "ref_len": b.ref_len,
        })
    print(json.dumps(out, ensure_ascii=False, indent=1))


if __name__ == "__main__":
    main()
