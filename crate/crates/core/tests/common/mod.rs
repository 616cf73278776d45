#![allow(dead_code)]

pub mod beam;
pub mod bleu_cases;
