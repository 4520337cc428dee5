#![allow(dead_code)]

use gfinfer_core::ast::{desugar, validate, DesugarOptions, Program, Rational};
use gfinfer_core::gf::{translate, GfProgram, TranslateOptions};
use gfinfer_core::kernel::{KernelSpec, Scalar};
use gfinfer_core::parser::parse;
use gfinfer_core::posterior::{summarize, PosteriorError, PosteriorOptions, Summary};
use proptest::prelude::*;

pub const VARS: [&str; 3] = ["A", "B", "C"];

pub fn var() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&VARS[..])
}

pub fn prob() -> impl Strategy<Value = String> {
    (2u32..=6).prop_flat_map(|b| (1..b).prop_map(move |a| format!("{a}/{b}")))
}

fn finite_dist() -> impl Strategy<Value = String> {
    prop_oneof![
        prob().prop_map(|p| format!("Bernoulli({p})")),
        (1u32..=3, prob()).prop_map(|(n, p)| format!("Binomial({n}, {p})")),
        (0u32..=2, 0u32..=2).prop_map(|(a, w)| format!("UniformDisc({a}, {})", a + w)),
        (0u32..=3).prop_map(|k| format!("Dirac({k})")),
        (var(), prob()).prop_map(|(v, p)| format!("Binomial({v}, {p})")),
    ]
}

fn event() -> impl Strategy<Value = String> {
    prop_oneof![
        (var(), prop::collection::btree_set(0u32..4, 0..3)).prop_map(|(v, s)| {
            let s: Vec<String> = s.iter().map(u32::to_string).collect();
            format!("{v} in {{{}}}", s.join(", "))
        }),
        (var(), 0u32..3).prop_map(|(v, m)| format!("{v} < {}", m + 1)),
        (var(), 0u32..3).prop_map(|(v, m)| format!("{v} != {m}")),
    ]
}

fn statement(observe: bool) -> BoxedStrategy<String> {
    let moves = prop_oneof![
        (var(), finite_dist()).prop_map(|(v, d)| format!("{v} ~ {d};")),
        (var(), finite_dist()).prop_map(|(v, d)| format!("{v} +~ {d};")),
        (var(), var(), 0u32..=2, 0u32..=2)
            .prop_map(|(v, w, c, k)| format!("{v} := {c}*{w} + {k};")),
    ];
    let leaf = if observe {
        prop_oneof![
            3 => moves,
            1 => event().prop_map(|e| format!("observe {e};")),
            1 => (0u32..=1, finite_dist()).prop_map(|(m, d)| format!("observe {m} ~ {d};")),
        ]
        .boxed()
    } else {
        moves.boxed()
    };
    leaf.prop_recursive(2, 8, 2, |inner| {
        (event(), inner.clone(), inner)
            .prop_map(|(c, a, b)| format!("if {c} {{ {a} }} else {{ {b} }}"))
    })
    .boxed()
}

/// Finite-discrete programs over `A`, `B`, `C`, each with a definite prior.
pub fn finite_program(observe: bool) -> impl Strategy<Value = String> {
    program_of_length(observe, 8)
}

pub fn program_of_length(observe: bool, max_len: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(statement(observe), 1..max_len).prop_map(|s| {
        format!(
            "A ~ Bernoulli(1/2);\nB ~ UniformDisc(0, 2);\nC := 1;\n{}\n",
            s.join("\n")
        )
    })
}

pub fn surface(src: &str) -> Program {
    parse(src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

pub fn compile(src: &str, naive_observe: bool) -> GfProgram {
    let program = surface(src);
    validate(&program).unwrap_or_else(|e| panic!("{e}\n{src}"));
    let core = desugar(&program, DesugarOptions { naive_observe });
    translate(&core, TranslateOptions { mgf: true }).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

pub fn var_index(gf: &GfProgram, name: &str) -> usize {
    gf.vars()
        .iter()
        .position(|v| v == name)
        .expect("variable exists")
}

pub fn summary<T: Scalar>(
    gf: &GfProgram,
    var: &str,
    kernel: KernelSpec,
    mass_limit: Option<u64>,
) -> Result<Summary<T>, PosteriorError> {
    summarize::<T>(
        gf,
        var_index(gf, var),
        &PosteriorOptions {
            ctx: kernel.ctx(),
            memoize: true,
            mass_limit,
        },
    )
}

pub fn exact(
    gf: &GfProgram,
    var: &str,
    mass_limit: Option<u64>,
) -> Result<Summary<Rational>, PosteriorError> {
    summary::<Rational>(gf, var, KernelSpec::Rational, mass_limit)
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}
