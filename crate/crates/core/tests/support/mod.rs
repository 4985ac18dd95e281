#![allow(dead_code)]

//! Independent oracles and helpers shared by the integration tests. Nothing in
//! here calls the library routine it is used to check.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use coarse_roe::coarse_space::FiniteSpace;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture_path(name: &str) -> PathBuf {
    crate_dir().join("tests").join("fixtures").join(name)
}

// ---------------------------------------------------------------------------
// JSON schema subset: type, enum, const, required, properties,
// additionalProperties, items, minItems, maxItems, minimum, maximum, anyOf,
// and $ref to "#/$defs/..." or to a sibling schema file.

pub struct Schemas {
    docs: HashMap<String, Value>,
}

impl Schemas {
    pub fn load() -> Self {
        let dir = crate_dir().join("schemas");
        let mut docs = HashMap::new();
        for entry in std::fs::read_dir(&dir).expect("schemas dir") {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "json") {
                let text = std::fs::read_to_string(&path).unwrap();
                let name = path.file_name().unwrap().to_string_lossy().into_owned();
                docs.insert(name, serde_json::from_str(&text).unwrap());
            }
        }
        Schemas { docs }
    }

    pub fn validate(&self, file: &str, instance: &Value) -> Vec<String> {
        let mut errors = Vec::new();
        let schema = &self.docs[file];
        self.check(file, schema, instance, "$", &mut errors);
        errors
    }

    fn resolve<'a>(&'a self, doc: &str, reference: &str) -> (String, &'a Value) {
        let (file, pointer) = match reference.split_once('#') {
            Some(("", p)) => (doc.to_string(), p.to_string()),
            Some((f, p)) => (f.to_string(), p.to_string()),
            None => (reference.to_string(), String::new()),
        };
        let root = self.docs.get(&file).unwrap_or_else(|| panic!("unknown schema {file}"));
        let target = root
            .pointer(&pointer)
            .unwrap_or_else(|| panic!("dangling reference {reference}"));
        (file, target)
    }

    fn check(&self, doc: &str, schema: &Value, inst: &Value, path: &str, errs: &mut Vec<String>) {
        let Some(obj) = schema.as_object() else { return };
        if let Some(r) = obj.get("$ref").and_then(Value::as_str) {
            let (file, target) = self.resolve(doc, r);
            self.check(&file, target, inst, path, errs);
        }
        if let Some(t) = obj.get("type") {
            let allowed: Vec<&str> = match t {
                Value::String(s) => vec![s.as_str()],
                Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
                _ => vec![],
            };
            if !allowed.iter().any(|t| type_matches(t, inst)) {
                errs.push(format!("{path}: expected {allowed:?}, got {inst}"));
                return;
            }
        }
        if let Some(e) = obj.get("enum").and_then(Value::as_array) {
            if !e.contains(inst) {
                errs.push(format!("{path}: {inst} not in enum"));
            }
        }
        if let Some(c) = obj.get("const") {
            if c != inst {
                errs.push(format!("{path}: expected constant {c}"));
            }
        }
        if let Some(n) = inst.as_f64() {
            if let Some(min) = obj.get("minimum").and_then(Value::as_f64) {
                if n < min {
                    errs.push(format!("{path}: {n} < minimum {min}"));
                }
            }
            if let Some(max) = obj.get("maximum").and_then(Value::as_f64) {
                if n > max {
                    errs.push(format!("{path}: {n} > maximum {max}"));
                }
            }
        }
        if let Some(any) = obj.get("anyOf").and_then(Value::as_array) {
            let ok = any.iter().any(|s| {
                let mut sub = Vec::new();
                self.check(doc, s, inst, path, &mut sub);
                sub.is_empty()
            });
            if !ok {
                errs.push(format!("{path}: matches no alternative"));
            }
        }
        if let Some(map) = inst.as_object() {
            if let Some(req) = obj.get("required").and_then(Value::as_array) {
                for key in req.iter().filter_map(Value::as_str) {
                    if !map.contains_key(key) {
                        errs.push(format!("{path}: missing {key}"));
                    }
                }
            }
            let props = obj.get("properties").and_then(Value::as_object);
            for (key, value) in map {
                let sub_path = format!("{path}.{key}");
                match props.and_then(|p| p.get(key)) {
                    Some(s) => self.check(doc, s, value, &sub_path, errs),
                    None => match obj.get("additionalProperties") {
                        Some(Value::Bool(false)) => errs.push(format!("{sub_path}: not allowed")),
                        Some(s @ Value::Object(_)) => self.check(doc, s, value, &sub_path, errs),
                        _ => {}
                    },
                }
            }
        }
        if let Some(items) = inst.as_array() {
            if let Some(min) = obj.get("minItems").and_then(Value::as_u64) {
                if (items.len() as u64) < min {
                    errs.push(format!("{path}: fewer than {min} items"));
                }
            }
            if let Some(max) = obj.get("maxItems").and_then(Value::as_u64) {
                if (items.len() as u64) > max {
                    errs.push(format!("{path}: more than {max} items"));
                }
            }
            if let Some(s) = obj.get("items") {
                for (i, item) in items.iter().enumerate() {
                    self.check(doc, s, item, &format!("{path}[{i}]"), errs);
                }
            }
        }
    }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Linear algebra oracles (SVD route, independent of the Gram eigensolve and
// power iteration used by the library).

pub fn svd_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// `‖a - trunc(a, s)‖` with the tail assembled by hand.
pub fn tail_norm(a: &DMatrix<C64>, space: &FiniteSpace, s: f64) -> f64 {
    let n = a.nrows();
    let tail = DMatrix::from_fn(n, n, |x, y| if space.d(x, y) > s { a[(x, y)] } else { C64::new(0.0, 0.0) });
    svd_norm(&tail)
}

// ---------------------------------------------------------------------------
// Combinatorial oracles.

/// Kuhn's augmenting-path matching; `None` unless every left vertex is matched.
pub fn kuhn_saturating(adj: &[Vec<usize>], right: usize) -> Option<Vec<usize>> {
    fn try_kuhn(l: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &r in &adj[l] {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if owner[r].is_none() || try_kuhn(owner[r].unwrap(), adj, seen, owner) {
                owner[r] = Some(l);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; right];
    for l in 0..adj.len() {
        let mut seen = vec![false; right];
        if !try_kuhn(l, adj, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut mate = vec![usize::MAX; adj.len()];
    for (r, l) in owner.iter().enumerate() {
        if let Some(l) = l {
            mate[*l] = r;
        }
    }
    Some(mate)
}

/// Hall's condition by enumerating every subset of the left side.
pub fn hall_by_subsets(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    assert!(n <= 16, "subset enumeration is exponential");
    (1u32..(1 << n)).all(|mask| {
        let mut nbhd = std::collections::BTreeSet::new();
        for (l, list) in adj.iter().enumerate() {
            if mask & (1 << l) != 0 {
                nbhd.extend(list.iter().copied());
            }
        }
        nbhd.len() >= mask.count_ones() as usize
    })
}

/// Fewest parts, each meeting every row and column at most once, covering
/// `pairs`; exhaustive colouring search.
pub fn min_partial_translation_cover(n: usize, pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    fn assign(
        i: usize,
        pairs: &[(usize, usize)],
        colours: usize,
        used: usize,
        row: &mut [Vec<bool>],
        col: &mut [Vec<bool>],
    ) -> bool {
        if i == pairs.len() {
            return true;
        }
        let (x, y) = pairs[i];
        // a fresh colour is only tried once, as the next unused one
        for c in 0..colours.min(used + 1) {
            if !row[c][x] && !col[c][y] {
                row[c][x] = true;
                col[c][y] = true;
                if assign(i + 1, pairs, colours, used.max(c + 1), row, col) {
                    return true;
                }
                row[c][x] = false;
                col[c][y] = false;
            }
        }
        false
    }
    // a row or column with d pairs needs d distinct parts
    let mut degree = vec![0usize; 2 * n];
    for &(x, y) in pairs {
        degree[x] += 1;
        degree[n + y] += 1;
    }
    let lower = degree.into_iter().max().unwrap_or(1);
    for colours in lower..=pairs.len() {
        let mut row = vec![vec![false; n]; colours];
        let mut col = vec![vec![false; n]; colours];
        if assign(0, pairs, colours, 0, &mut row, &mut col) {
            return colours;
        }
    }
    unreachable!("one colour per pair always works")
}

/// The δ-search done the slow way: every distinct squared entry magnitude is a
/// candidate, largest first; Hall is tested on both sides with Kuhn's
/// algorithm. Returns `(δ, f, g)` with `f: Y -> X`, `g: X -> Y`.
pub fn exhaustive_delta(v: &DMatrix<C64>) -> Option<(f64, Vec<usize>, Vec<usize>)> {
    let (nx, ny) = (v.nrows(), v.ncols());
    let mut masses: Vec<f64> = v.iter().map(|z| z.norm_sqr()).filter(|&m| m > 0.0).collect();
    masses.sort_by(|a, b| b.total_cmp(a));
    masses.dedup();
    for delta in masses {
        let y_adj: Vec<Vec<usize>> = (0..ny)
            .map(|y| (0..nx).filter(|&x| v[(x, y)].norm_sqr() >= delta).collect())
            .collect();
        let x_adj: Vec<Vec<usize>> = (0..nx)
            .map(|x| (0..ny).filter(|&y| v[(x, y)].norm_sqr() >= delta).collect())
            .collect();
        if let (Some(f), Some(g)) = (kuhn_saturating(&y_adj, nx), kuhn_saturating(&x_adj, ny)) {
            return Some((delta, f, g));
        }
    }
    None
}

/// Cantor–Schröder–Bernstein by forward orbit bookkeeping: a point of `X`
/// takes `f⁻¹` exactly when its backward orbit is finite and begins in `Y`.
pub fn csb_oracle(f: &[usize], g: &[usize]) -> Vec<usize> {
    let n = g.len();
    let mut f_inv = vec![None; n];
    for (y, &x) in f.iter().enumerate() {
        f_inv[x] = Some(y);
    }
    let mut g_inv = vec![None; n];
    for (x, &y) in g.iter().enumerate() {
        g_inv[y] = Some(x);
    }
    (0..n)
        .map(|x0| {
            let mut x = x0;
            for _ in 0..=2 * n {
                let Some(y) = f_inv[x] else { return g[x0] };
                let Some(prev) = g_inv[y] else { return f_inv[x0].unwrap() };
                x = prev;
            }
            g[x0]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Random inputs.

/// A random entourage on `n` points whose rows and columns hold at most `k` pairs.
pub fn random_entourage(rng: &mut ChaCha8Rng, n: usize, k: usize, density: f64) -> Vec<(usize, usize)> {
    let mut rows = vec![0usize; n];
    let mut cols = vec![0usize; n];
    let mut pairs = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if rows[x] < k && cols[y] < k && rng.random_bool(density) {
                rows[x] += 1;
                cols[y] += 1;
                pairs.push((x, y));
            }
        }
    }
    pairs
}

pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// `‖a‖` as the square root of the top eigenvalue of the Hermitian `a*a`.
pub fn eig_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    gram.symmetric_eigen().eigenvalues.iter().copied().fold(0.0, f64::max).sqrt()
}
