pub struct Case {
    pub hyps: &'static [&'static str],
    pub refs: &'static [&'static str],
    pub bleu: f64,
    pub precisions: [f64; 4],
    pub bp: f64,
    pub lens: (usize, usize),
}

// Scored with sacrebleu 2.4.3 (tokenize=none, smooth=none); see tools/bleu_cases.py.
pub const CASES: &[Case] = &[
    Case {
        hyps: &["the cat sat on the mat"],
        refs: &["the cat is on the mat"],
        bleu: 0.0,
        precisions: [83.333333, 60.0, 25.0, 0.0],
        bp: 1.0,
        lens: (6, 6),
    },
    Case {
        hyps: &["the cat is on the mat"],
        refs: &["the cat is on the mat"],
        bleu: 100.0,
        precisions: [100.0, 100.0, 100.0, 100.0],
        bp: 1.0,
        lens: (6, 6),
    },
    Case {
        hyps: &["a b c d e f"],
        refs: &["f e d c b a"],
        bleu: 0.0,
        precisions: [100.0, 0.0, 0.0, 0.0],
        bp: 1.0,
        lens: (6, 6),
    },
    Case {
        hyps: &["the the the the the the the"],
        refs: &["the cat is on the mat"],
        bleu: 0.0,
        precisions: [28.571429, 0.0, 0.0, 0.0],
        bp: 1.0,
        lens: (7, 6),
    },
    Case {
        hyps: &["the cat"],
        refs: &["the cat is on the mat"],
        bleu: 0.0,
        precisions: [100.0, 100.0, 0.0, 0.0],
        bp: 0.135335,
        lens: (2, 6),
    },
    Case {
        hyps: &["the cat is on the mat today and tomorrow"],
        refs: &["the cat is on the mat"],
        bleu: 58.739491,
        precisions: [66.666667, 62.5, 57.142857, 50.0],
        bp: 1.0,
        lens: (9, 6),
    },
    Case {
        hyps: &["a b c d", "e f g h i"],
        refs: &["a b c d", "e f g x i"],
        bleu: 59.694918,
        precisions: [88.888889, 71.428571, 60.0, 33.333333],
        bp: 1.0,
        lens: (9, 9),
    },
    Case {
        hyps: &["one two three four five", "six seven eight nine ten"],
        refs: &["one two three four five", "ten nine eight seven six"],
        bleu: 59.460356,
        precisions: [100.0, 50.0, 50.0, 50.0],
        bp: 1.0,
        lens: (10, 10),
    },
    Case {
        hyps: &["x y z w", "p q r s t u"],
        refs: &["x y z w v", "p q r s t"],
        bleu: 83.759224,
        precisions: [90.0, 87.5, 83.333333, 75.0],
        bp: 1.0,
        lens: (10, 10),
    },
    Case {
        hyps: &["it is a guide to action which ensures that the military always obeys the commands of the party"],
        refs: &["it is a guide to action that ensures that the military will forever heed party commands"],
        bleu: 42.085981,
        precisions: [66.666667, 47.058824, 37.5, 26.666667],
        bp: 1.0,
        lens: (18, 16),
    },
    Case {
        hyps: &["he read the book because he was interested in world history", "the cat sat on the mat"],
        refs: &["he was interested in world history because he read the book", "the cat is on the mat"],
        bleu: 61.964901,
        precisions: [94.117647, 80.0, 53.846154, 36.363636],
        bp: 1.0,
        lens: (17, 17),
    },
    Case {
        hyps: &["a a a a b b b b"],
        refs: &["a a b b a a b b"],
        bleu: 46.713798,
        precisions: [100.0, 71.428571, 33.333333, 20.0],
        bp: 1.0,
        lens: (8, 8),
    },
    Case {
        hyps: &["ein hund läuft über die straße", "zwei männer spielen fußball"],
        refs: &["ein hund rennt über die straße", "zwei männer spielen fußball ."],
        bleu: 48.766771,
        precisions: [90.0, 75.0, 50.0, 25.0],
        bp: 0.904837,
        lens: (10, 11),
    },
    Case {
        hyps: &["1 2 3 4 5 6 7 8 9 10"],
        refs: &["1 2 3 4 5 6 7 8 9 10 11 12"],
        bleu: 81.873075,
        precisions: [100.0, 100.0, 100.0, 100.0],
        bp: 0.818731,
        lens: (10, 12),
    },
    Case {
        hyps: &["w1 w2 w3 w4", "w5 w6", "w7 w8 w9 w10 w11"],
        refs: &["w1 w2 w3 w4", "w5 w6 w7", "w7 w8 w9 w10 w12"],
        bleu: 73.692316,
        precisions: [90.909091, 87.5, 80.0, 66.666667],
        bp: 0.913101,
        lens: (11, 12),
    },
    Case {
        hyps: &["the quick brown fox jumps over the lazy dog", "and runs away fast"],
        refs: &["the quick brown fox jumped over the lazy dog", "and ran away quickly"],
        bleu: 48.044222,
        precisions: [76.923077, 54.545455, 44.444444, 28.571429],
        bp: 1.0,
        lens: (13, 13),
    },
    Case {
        hyps: &["a b c d e", "a b c d e"],
        refs: &["a b c d e", "a b c d f"],
        bleu: 83.759224,
        precisions: [90.0, 87.5, 83.333333, 75.0],
        bp: 1.0,
        lens: (10, 10),
    },
    Case {
        hyps: &["t1 t2 t3 t4 t5 t6 t7 t8", "", "t9 t10 t11 t12"],
        refs: &["t1 t2 t3 t4 t5 t6 t7 t8", "t0", "t9 t10 t11 t12"],
        bleu: 92.004441,
        precisions: [100.0, 100.0, 100.0, 100.0],
        bp: 0.920044,
        lens: (12, 13),
    },
    Case {
        hyps: &["red green blue red green blue red green"],
        refs: &["red green blue red green blue"],
        bleu: 68.037493,
        precisions: [75.0, 71.428571, 66.666667, 60.0],
        bp: 1.0,
        lens: (8, 6),
    },
    Case {
        hyps: &["x . y . z . w"],
        refs: &["x . y . z . w ."],
        bleu: 86.68779,
        precisions: [100.0, 100.0, 100.0, 100.0],
        bp: 0.866878,
        lens: (7, 8),
    },
];
