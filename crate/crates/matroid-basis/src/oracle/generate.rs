//! Seeded instance generators and the `gen:` string grammar used by the CLI.
//!
//! A generator string looks like `gen:uniform:n=256,r=n/4`. Values are
//! integers, or fractions of the ground size written `n/K`, so a single
//! string works across a size grid.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::oracle::MatroidInstance;

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub family: String,
    pub params: Vec<(String, String)>,
}

impl GenSpec {
    pub fn parse(text: &str) -> Result<GenSpec> {
        let rest = text
            .strip_prefix("gen:")
            .ok_or_else(|| Error::Parse(format!("generator must start with 'gen:': {text}")))?;
        let (family, params_text) = match rest.split_once(':') {
            Some((f, p)) => (f, p),
            None => (rest, ""),
        };
        if family.is_empty() {
            return Err(Error::Parse("generator family missing".into()));
        }
        let mut params = Vec::new();
        for kv in params_text.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad generator param '{kv}'")))?;
            params.push((k.to_string(), v.to_string()));
        }
        Ok(GenSpec { family: family.to_string(), params })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Resolve a parameter that may be written as a fraction of n ("n/4").
    fn resolve(&self, key: &str, n: usize, default: Option<usize>) -> Result<usize> {
        match self.get(key) {
            None => default.ok_or_else(|| Error::Parse(format!("missing generator param '{key}'"))),
            Some(v) => parse_sized(v, n),
        }
    }

    /// Instantiate at ground-size parameter `n` with a deterministic seed.
    pub fn build(&self, n: usize, seed: u64) -> Result<MatroidInstance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d61_7472_6f69_64);
        match self.family.as_str() {
            "uniform" => {
                let r = self.resolve("r", n, Some(n / 4))?;
                Ok(MatroidInstance::uniform(n, r))
            }
            "rank1" => Ok(MatroidInstance::uniform(n, 1.min(n))),
            "free" => Ok(MatroidInstance::uniform(n, n)),
            "partition" => {
                let block_size = self.resolve("block_size", n, Some(4))?.max(1);
                let cap = self.resolve("cap", n, Some(1))? as u32;
                let blocks = n.div_ceil(block_size);
                let block_of = (0..n).map(|i| (i / block_size) as u32).collect();
                MatroidInstance::partition(block_of, vec![cap; blocks])
            }
            // Cycle matroid of G(v, c/v); ground size is the sampled edge count.
            "graphic-gnp" => {
                let v = self.resolve("v", n, Some(n))?.max(2);
                let c = self.resolve("c", n, Some(3))? as f64;
                let p = (c / v as f64).min(1.0);
                let mut edges = Vec::new();
                for a in 0..v as u32 {
                    for b in (a + 1)..v as u32 {
                        if rng.random::<f64>() < p {
                            edges.push((a, b));
                        }
                    }
                }
                if edges.is_empty() {
                    edges.push((0, 1));
                }
                MatroidInstance::graphic(v, edges)
            }
            // Complete graph padded with repeated edges to exactly n elements.
            "graphic-complete" => {
                let mut v = 2usize;
                while (v + 1) * v / 2 <= n {
                    v += 1;
                }
                let mut edges = Vec::with_capacity(n);
                'fill: loop {
                    for a in 0..v as u32 {
                        for b in (a + 1)..v as u32 {
                            if edges.len() == n {
                                break 'fill;
                            }
                            edges.push((a, b));
                        }
                    }
                }
                MatroidInstance::graphic(v, edges)
            }
            "linear" => {
                let modulus = self.resolve("p", n, Some(2))? as u64;
                let rows = self.resolve("rows", n, Some((n / 16).clamp(2, 128)))?;
                let data: Vec<u64> =
                    (0..rows * n).map(|_| rng.random_range(0..modulus)).collect();
                MatroidInstance::linear(modulus, rows, &data)
            }
            // Direct sum of uniform blocks: n split into blocks of `block` elements.
            "sum-uniform" => {
                let block = self.resolve("block", n, Some(32))?.max(1);
                let r = self.resolve("r", block, Some(block / 4))?;
                let mut parts = Vec::new();
                let mut left = n;
                while left > 0 {
                    let b = left.min(block);
                    parts.push(MatroidInstance::uniform(b, r.min(b)));
                    left -= b;
                }
                Ok(MatroidInstance::direct_sum(parts))
            }
            // Direct sum of equal-size uniform blocks whose ranks double every
            // other block, so iterative peeling strips them tempo by tempo.
            "cascade" => {
                let block = self.resolve("block", n, Some(32))?.max(2);
                let mut parts = Vec::new();
                let mut left = n;
                let mut i = 0usize;
                while left > 0 {
                    let b = left.min(block);
                    let r = (1usize << (i / 2).min(20)).min(b);
                    parts.push(MatroidInstance::uniform(b, r));
                    left -= b;
                    i += 1;
                }
                Ok(MatroidInstance::direct_sum(parts))
            }
            // Mixed direct sum: alternating uniform ranks, for peel-trace tests.
            "sum-mixed" => {
                let block = self.resolve("block", n, Some(16))?.max(2);
                let mut parts = Vec::new();
                let mut left = n;
                let mut i = 0usize;
                while left > 0 {
                    let b = left.min(block);
                    let r = match i % 3 {
                        0 => 1,
                        1 => (b / 2).max(1),
                        _ => (b / 4).max(1),
                    };
                    parts.push(MatroidInstance::uniform(b, r.min(b)));
                    left -= b;
                    i += 1;
                }
                Ok(MatroidInstance::direct_sum(parts))
            }
            other => Err(Error::Parse(format!("unknown generator family '{other}'"))),
        }
    }
}

fn parse_sized(v: &str, n: usize) -> Result<usize> {
    if v == "n" {
        return Ok(n);
    }
    if let Some(d) = v.strip_prefix("n/") {
        let d: usize = d.parse().map_err(|_| Error::Parse(format!("bad fraction '{v}'")))?;
        if d == 0 {
            return Err(Error::Parse("division by zero in generator param".into()));
        }
        return Ok((n / d).max(1));
    }
    v.parse().map_err(|_| Error::Parse(format!("bad integer '{v}'")))
}
