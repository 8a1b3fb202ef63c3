//! Self-describing text container for networks, optimizer states and vectors.
//!
//! Floats are stored as the hex of their IEEE-754 bits so a save/load cycle
//! is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, Mlp};

const MAGIC: &str = "rlfd-checkpoint 1";

#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    Net(Mlp),
    Adam(AdamState),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    entries: Vec<(String, Entry)>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn hex_line(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 17);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:016x}", v.to_bits());
    }
    s
}

fn parse_hex_line(line: &str, expected: usize) -> Result<Vec<f64>> {
    let out: Vec<f64> = line
        .split_ascii_whitespace()
        .map(|t| u64::from_str_radix(t, 16).map(f64::from_bits))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| bad(format!("bad float encoding: {e}")))?;
    if out.len() != expected {
        return Err(bad(format!("expected {expected} values, found {}", out.len())));
    }
    Ok(out)
}

fn field<'a>(tokens: &[&'a str], key: &str) -> Result<&'a str> {
    tokens
        .iter()
        .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| bad(format!("missing field {key}")))
}

fn next_payload<'a>(lines: &mut std::str::Lines<'a>) -> Result<&'a str> {
    lines.next().ok_or_else(|| bad("truncated payload"))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| bad(format!("bad integer {s:?}")))
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, name: &str, entry: Entry) {
        assert!(
            !name.is_empty() && !name.contains(char::is_whitespace),
            "checkpoint entry names are single tokens"
        );
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = entry,
            None => self.entries.push((name.to_string(), entry)),
        }
    }

    pub fn put_net(&mut self, name: &str, net: &Mlp) {
        self.put(name, Entry::Net(net.clone()));
    }

    pub fn put_adam(&mut self, name: &str, st: &AdamState) {
        self.put(name, Entry::Adam(st.clone()));
    }

    pub fn put_vec(&mut self, name: &str, v: &[f64]) {
        self.put(name, Entry::Vector(v.to_vec()));
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn net(&self, name: &str) -> Result<Mlp> {
        match self.get(name) {
            Some(Entry::Net(n)) => Ok(n.clone()),
            _ => Err(bad(format!("no network named {name}"))),
        }
    }

    pub fn adam(&self, name: &str) -> Result<AdamState> {
        match self.get(name) {
            Some(Entry::Adam(a)) => Ok(a.clone()),
            _ => Err(bad(format!("no optimizer state named {name}"))),
        }
    }

    pub fn vector(&self, name: &str) -> Result<Vec<f64>> {
        match self.get(name) {
            Some(Entry::Vector(v)) => Ok(v.clone()),
            _ => Err(bad(format!("no vector named {name}"))),
        }
    }

    pub fn encode(&self) -> String {
        let mut s = String::new();
        s.push_str(MAGIC);
        s.push('\n');
        for (name, e) in &self.entries {
            match e {
                Entry::Net(n) => {
                    let dims: Vec<String> = n.dims().iter().map(|d| d.to_string()).collect();
                    let _ = writeln!(
                        s,
                        "net {name} dims={} output={} params={}",
                        dims.join(","),
                        n.output_activation().as_str(),
                        n.num_params()
                    );
                    s.push_str(&hex_line(n.params()));
                    s.push('\n');
                }
                Entry::Adam(a) => {
                    let _ = writeln!(
                        s,
                        "adam {name} t={} len={} hyper={}",
                        a.t,
                        a.m.len(),
                        hex_line(&[a.beta1, a.beta2, a.eps]).replace(' ', ",")
                    );
                    s.push_str(&hex_line(&a.m));
                    s.push('\n');
                    s.push_str(&hex_line(&a.v));
                    s.push('\n');
                }
                Entry::Vector(v) => {
                    let _ = writeln!(s, "vec {name} len={}", v.len());
                    s.push_str(&hex_line(v));
                    s.push('\n');
                }
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn decode(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing header"));
        }
        let mut cp = Checkpoint::new();
        loop {
            let header = lines.next().ok_or_else(|| bad("missing end marker"))?;
            if header == "end" {
                break;
            }
            let tokens: Vec<&str> = header.split_ascii_whitespace().collect();
            if tokens.len() < 2 {
                return Err(bad(format!("bad entry header {header:?}")));
            }
            let name = tokens[1];
            match tokens[0] {
                "net" => {
                    let dims = field(&tokens, "dims")?
                        .split(',')
                        .map(parse_usize)
                        .collect::<Result<Vec<_>>>()?;
                    let output = Activation::parse(field(&tokens, "output")?)
                        .ok_or_else(|| bad("unknown activation"))?;
                    let n = parse_usize(field(&tokens, "params")?)?;
                    let params = parse_hex_line(next_payload(&mut lines)?, n)?;
                    cp.put(name, Entry::Net(Mlp::from_params(&dims, output, params)?));
                }
                "adam" => {
                    let t = field(&tokens, "t")?
                        .parse()
                        .map_err(|_| bad("bad step counter"))?;
                    let len = parse_usize(field(&tokens, "len")?)?;
                    let hyper = parse_hex_line(&field(&tokens, "hyper")?.replace(',', " "), 3)?;
                    let m = parse_hex_line(next_payload(&mut lines)?, len)?;
                    let v = parse_hex_line(next_payload(&mut lines)?, len)?;
                    cp.put(
                        name,
                        Entry::Adam(AdamState {
                            m,
                            v,
                            t,
                            beta1: hyper[0],
                            beta2: hyper[1],
                            eps: hyper[2],
                        }),
                    );
                }
                "vec" => {
                    let len = parse_usize(field(&tokens, "len")?)?;
                    let v = parse_hex_line(next_payload(&mut lines)?, len)?;
                    cp.put(name, Entry::Vector(v));
                }
                other => return Err(bad(format!("unknown entry kind {other:?}"))),
            }
        }
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read_to_string(path)?)
    }
}
