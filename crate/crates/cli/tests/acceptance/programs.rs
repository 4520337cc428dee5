//! Seeded random programs in surface syntax.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const VARS: [&str; 4] = ["A", "B", "C", "D"];

/// A probability `a/b` strictly inside (0, 1).
pub fn prob(rng: &mut ChaCha8Rng) -> String {
    let b = rng.random_range(2..=7u32);
    let a = rng.random_range(1..b);
    format!("{a}/{b}")
}

pub struct Shape {
    /// Allow Poisson, geometric and negative binomial draws.
    pub infinite: bool,
    pub max_statements: usize,
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    shape: &'a Shape,
    nvars: usize,
    budget: usize,
    out: String,
}

impl Gen<'_> {
    fn var(&mut self) -> &'static str {
        VARS[self.rng.random_range(0..self.nvars)]
    }

    fn small(&mut self, hi: u64) -> u64 {
        self.rng.random_range(0..=hi)
    }

    fn const_dist(&mut self) -> String {
        let pick = self
            .rng
            .random_range(0..if self.shape.infinite { 8 } else { 5 });
        match pick {
            0 => format!("Bernoulli({})", prob(self.rng)),
            1 => {
                let k = self.rng.random_range(1..=3);
                let w: Vec<u32> = (0..k).map(|_| self.rng.random_range(1..=4)).collect();
                let s: u32 = w.iter().sum();
                let args: Vec<String> = w.iter().map(|x| format!("{x}/{s}")).collect();
                format!("Categorical({})", args.join(", "))
            }
            2 => format!(
                "Binomial({}, {})",
                self.rng.random_range(1..=3),
                prob(self.rng)
            ),
            3 => {
                let lo = self.small(2);
                format!("UniformDisc({lo}, {})", lo + self.small(2))
            }
            4 => format!("Dirac({})", self.small(3)),
            5 => format!(
                "Poisson({}/{})",
                self.rng.random_range(1..=9),
                self.rng.random_range(1..=3)
            ),
            6 => format!("Geometric({})", prob(self.rng)),
            _ => format!(
                "NegBinomial({}, {})",
                self.rng.random_range(1..=3),
                prob(self.rng)
            ),
        }
    }

    fn dist(&mut self) -> String {
        if self.rng.random_bool(0.3) {
            let v = self.var();
            if self.shape.infinite && self.rng.random_bool(0.4) {
                return format!("Poisson({}/2*{v})", self.rng.random_range(1..=3));
            }
            format!("Binomial({v}, {})", prob(self.rng))
        } else {
            self.const_dist()
        }
    }

    fn cond(&mut self, depth: usize) -> String {
        let v = self.var();
        match self.rng.random_range(0..if depth < 1 { 9 } else { 6 }) {
            0 => {
                let set: Vec<String> = (0..=4u64)
                    .filter(|_| self.rng.random_bool(0.4))
                    .map(|x| x.to_string())
                    .collect();
                format!("{v} in {{{}}}", set.join(", "))
            }
            1 => format!("{v} < {}", self.small(3) + 1),
            2 => format!("{v} >= {}", self.small(3)),
            3 => format!("{} < {v}", self.small(2)),
            4 => format!("{v} != {}", self.small(3)),
            5 => format!("{v} = {}", self.small(3)),
            6 => format!("not ({})", self.cond(depth + 1)),
            7 => format!("{} and {}", self.cond(depth + 1), self.cond(depth + 1)),
            _ => format!("({} or {})", self.cond(depth + 1), self.cond(depth + 1)),
        }
    }

    fn line(&mut self, indent: usize, s: &str) {
        self.out.push_str(&"  ".repeat(indent));
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn stmt(&mut self, indent: usize) {
        self.budget -= 1;
        let v = self.var();
        let branch_ok = self.budget >= 2 && indent < 2;
        match self.rng.random_range(0..10) {
            0..=2 => {
                let d = self.dist();
                self.line(indent, &format!("{v} ~ {d};"));
            }
            3 => {
                let d = self.dist();
                self.line(indent, &format!("{v} +~ {d};"));
            }
            4 => {
                let w = self.var();
                let s = match self.rng.random_range(0..3) {
                    0 => format!("{v} := {} * {w} + {};", self.small(2), self.small(2)),
                    1 => format!("{v} += {w};"),
                    _ => format!("{v} := {};", self.small(3)),
                };
                self.line(indent, &s);
            }
            5 | 6 if branch_ok => {
                let c = if self.rng.random_bool(0.25) {
                    format!("1 ~ Bernoulli({})", prob(self.rng))
                } else {
                    self.cond(0)
                };
                self.line(indent, &format!("if {c} {{"));
                self.stmt(indent + 1);
                if self.budget > 0 && self.rng.random_bool(0.5) {
                    self.line(indent, "} else {");
                    self.stmt(indent + 1);
                }
                self.line(indent, "}");
            }
            7 if indent > 0 && self.rng.random_bool(0.3) => self.line(indent, "fail;"),
            7 | 8 => {
                let c = self.cond(1);
                self.line(indent, &format!("observe {c};"));
            }
            _ => {
                let m = if self.rng.random_bool(0.7) {
                    self.small(1)
                } else {
                    self.small(if self.shape.infinite { 5 } else { 2 })
                };
                let d = self.dist();
                self.line(indent, &format!("observe {m} ~ {d};"));
            }
        }
    }
}

/// A program over up to four variables, returned with a query variable that
/// it mentions.
pub fn random_program(rng: &mut ChaCha8Rng, shape: &Shape) -> (String, &'static str) {
    let nvars = rng.random_range(1..=VARS.len());
    let budget = rng.random_range(1..=shape.max_statements);
    let mut g = Gen {
        rng,
        shape,
        nvars,
        budget,
        out: String::new(),
    };
    // every variable is drawn once up front so that it has a definite prior
    for &v in &VARS[..nvars] {
        if g.budget == 0 {
            break;
        }
        g.budget -= 1;
        let d = g.const_dist();
        g.line(0, &format!("{v} ~ {d};"));
    }
    while g.budget > 0 {
        g.stmt(0);
    }
    let query = VARS[..nvars].choose(g.rng).copied().unwrap_or("A");
    let out = g.out;
    // the query must exist even if the budget ran out before its prior
    let src = if out.contains(&format!("{query} ~")) {
        out
    } else {
        format!("{out}{query} := 0;\n")
    };
    (src, query)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserveFamily {
    Binomial,
    NegBinomial,
    Poisson,
    Bernoulli,
}

impl ObserveFamily {
    pub const ALL: [ObserveFamily; 4] = [
        ObserveFamily::Binomial,
        ObserveFamily::NegBinomial,
        ObserveFamily::Poisson,
        ObserveFamily::Bernoulli,
    ];
}

pub struct ObserveCase {
    pub src: String,
    pub queries: Vec<&'static str>,
    /// No `exp` or `ln` anywhere, so the rational kernel applies.
    pub rational: bool,
}

fn count_prior(rng: &mut ChaCha8Rng, allow_poisson: bool) -> (String, bool) {
    match rng.random_range(0..if allow_poisson { 5 } else { 4 }) {
        0 => (
            format!("Binomial({}, {})", rng.random_range(1..=8), prob(rng)),
            true,
        ),
        1 => (format!("Geometric({})", prob(rng)), true),
        2 => (
            format!("NegBinomial({}, {})", rng.random_range(1..=4), prob(rng)),
            true,
        ),
        3 => {
            let lo = rng.random_range(0..=3);
            (
                format!("UniformDisc({lo}, {})", lo + rng.random_range(0..=6)),
                true,
            )
        }
        _ => (format!("Poisson({}/2)", rng.random_range(1..=12)), false),
    }
}

/// A program whose observations all go through one compound family.
pub fn observe_case(rng: &mut ChaCha8Rng, family: ObserveFamily) -> ObserveCase {
    let mut src = String::new();
    let mut rational = true;
    let nobs = rng.random_range(1..=3);
    match family {
        ObserveFamily::Bernoulli => {
            let continuous = rng.random_bool(0.6);
            if continuous {
                rational = false;
                let a = rng.random_range(0..=2);
                let b = rng.random_range(a + 1..=4);
                src.push_str(&format!("P ~ UniformCont({a}/4, {b}/4);\n"));
            } else {
                src.push_str(&format!("P ~ Bernoulli({});\n", prob(rng)));
            }
            src.push_str(&format!(
                "Y ~ Binomial({}, {});\n",
                rng.random_range(1..=3),
                prob(rng)
            ));
            for _ in 0..nobs {
                let m = rng.random_range(0..=1);
                src.push_str(&format!("observe {m} ~ Bernoulli(P);\n"));
                if rng.random_bool(0.5) {
                    src.push_str(&format!("Y +~ Bernoulli({});\n", prob(rng)));
                }
            }
            ObserveCase {
                src,
                queries: vec!["P", "Y"],
                rational,
            }
        }
        _ => {
            let (prior, e_free) = count_prior(rng, true);
            rational &= e_free;
            src.push_str(&format!("X ~ {prior};\n"));
            src.push_str(&format!(
                "Y ~ Binomial({}, {});\n",
                rng.random_range(1..=3),
                prob(rng)
            ));
            for _ in 0..nobs {
                let m = rng.random_range(0..=5);
                let d = match family {
                    ObserveFamily::Binomial => format!("Binomial(X, {})", prob(rng)),
                    ObserveFamily::NegBinomial => format!("NegBinomial(X, {})", prob(rng)),
                    _ => {
                        rational = false;
                        format!("Poisson({}/3*X)", rng.random_range(1..=6))
                    }
                };
                src.push_str(&format!("observe {m} ~ {d};\n"));
                if rng.random_bool(0.4) {
                    src.push_str(&format!("X +~ Binomial(Y, {});\n", prob(rng)));
                }
            }
            ObserveCase {
                src,
                queries: vec!["X", "Y"],
                rational,
            }
        }
    }
}
