//! Template-based generator for a small labeled corpus.
//!
//! Every function is a random signature, some local declarations, the
//! allocation and setup of an object, one class-specific core pattern, at
//! most one neutral filler statement and a return. Buggy classes get a vulnerable core; CLEAN gets either the
//! patched form of one of those cores or no core at all. Filler varies
//! structurally (statement kinds and counts), not just in names, so samples
//! stay distinct after tokenization erases identifier spellings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Label, LabeledSample};
use crate::lexer::{tokenize_ids, TokenTable};

const NAMES: &[&str] = &[
    "buf", "data", "key", "value", "name", "path", "msg", "entry", "item", "node", "req", "resp",
    "hdr", "param", "line", "token", "field", "src", "dst", "tmp",
];
const STRUCTS: &[&str] = &[
    "iscsi_param", "request", "device", "conn_ctx", "session", "packet", "entry_list",
    "node_info", "extra_response", "frontend",
];
const MEMBERS: &[&str] = &["key", "value", "name", "data", "list", "next", "len", "flags", "id", "priv"];
const LOGGERS: &[&str] = &["pr_err", "pr_warn", "log_msg", "dev_warn", "printk"];
const HELPERS: &[&str] = &["do_work", "process", "lookup_entry", "find_node", "update_state", "handle"];
const ALLOCS: &[&str] = &["kzalloc", "kmalloc", "alloc_obj", "malloc"];
const CONSTS: &[&str] = &["MAX_LEN", "VALUE_MAXLEN", "BUF_SIZE", "LIMIT", "NOTUNDERSTOOD"];
const SCALARS: &[&str] = &["int", "long", "unsigned int", "short", "size_t", "u32"];
const RETURNS: &[&str] = &["int", "static int", "static s32", "long", "static long", "unsigned int", "void", "static void"];

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        *xs.choose(&mut self.rng).expect("non-empty pool")
    }

    fn name(&mut self) -> &'static str {
        self.pick(NAMES)
    }

    fn num(&mut self) -> u32 {
        *[0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 4096]
            .choose(&mut self.rng)
            .unwrap()
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn log_call(&mut self) -> String {
        let logger = self.pick(LOGGERS);
        let a = self.name();
        match self.rng.gen_range(0..3) {
            0 => format!("{logger}(\"unable to handle %s\\n\", {a});\n"),
            1 => format!("{logger}(\"value for %s exceeds %d,\"\n\t\t\" protocol error.\\n\", {a}, {});\n", self.pick(CONSTS)),
            _ => format!("{logger}(\"out of memory\\n\");\n"),
        }
    }

    fn signature(&mut self) -> (String, bool) {
        let ret = self.pick(RETURNS);
        let fname = format!("{}_{}", self.pick(HELPERS), self.name());
        let n_params = self.rng.gen_range(1..=3);
        let params: Vec<String> = (0..n_params)
            .map(|_| {
                let n = self.name();
                match self.rng.gen_range(0..6) {
                    0 => format!("char *{n}"),
                    1 => format!("const char *{n}"),
                    2 => format!("int {n}"),
                    3 => format!("size_t {n}"),
                    4 => format!("struct {} *{n}", self.pick(STRUCTS)),
                    _ => format!("void *{n}"),
                }
            })
            .collect();
        let sep = if self.chance(0.3) { ",\n\t" } else { ", " };
        (format!("{ret} {fname}({})\n{{\n", params.join(sep)), ret.ends_with("void"))
    }

    fn declaration(&mut self) -> String {
        let n = self.name();
        match self.rng.gen_range(0..4) {
            0 => format!("struct {} *{n};\n", self.pick(STRUCTS)),
            1 => format!("{} {n} = {};\n", self.pick(SCALARS), self.num()),
            2 => format!("char {n}[{}];\n", self.rng.gen_range(8..512)),
            _ => "int ret = 0;\n".to_string(),
        }
    }

    fn filler(&mut self) -> String {
        let (a, b) = (self.name(), self.name());
        match self.rng.gen_range(0..16) {
            0 => format!("{} {a} = {};\n", self.pick(SCALARS), self.num()),
            1 => format!("char {a}[{}];\n", self.rng.gen_range(8..512)),
            2 => match self.rng.gen_range(0..3) {
                0 => format!("{a} += {b};\n"),
                1 => format!("{a} = {b} * {};\n", self.num()),
                _ => format!("{a}++;\n"),
            },
            3 => self.log_call(),
            4 => format!("list_for_each_entry({a}, &{b}->list, list) {{\n\tcount++;\n}}\n"),
            5 => format!("if ({a} & {}) {{\n\t{b} = {};\n}}\n", self.pick(CONSTS), self.num()),
            6 => format!("ret = {}({a}, {b});\n", self.pick(HELPERS)),
            7 => format!("struct {} *{a} = {b}->priv;\n", self.pick(STRUCTS)),
            8 => format!("memset({a}, 0, sizeof({a}));\n"),
            9 => format!(
                "switch ({a}) {{\ncase {}:\n\t{b} = {};\n\tbreak;\ndefault:\n\tbreak;\n}}\n",
                self.num(),
                self.num()
            ),
            10 => {
                let log = self.log_call();
                format!("if (strlen({a}) > {}) {{\n\t{log}\treturn -1;\n}}\n", self.pick(CONSTS))
            }
            11 => {
                let log = self.log_call();
                let s = self.pick(STRUCTS);
                let alloc = self.pick(ALLOCS);
                format!("{a} = {alloc}(sizeof(struct {s}), GFP_KERNEL);\nif (!{a}) {{\n\t{log}\treturn -ENOMEM;\n}}\n")
            }
            12 => format!("INIT_LIST_HEAD(&{a}->{});\n", self.pick(MEMBERS)),
            13 => format!(
                "list_add_tail(&{a}->{},\n\t\t&{b}->{});\n",
                self.pick(MEMBERS),
                self.pick(MEMBERS)
            ),
            14 => format!("mutex_lock(&{a}->lock);\n{b}->{} = {};\nmutex_unlock(&{a}->lock);\n", self.pick(MEMBERS), self.num()),
            _ => format!("while ({a} != NULL) {{\n\t{a} = {a}->next;\n}}\n"),
        }
    }

    /// Vulnerable core for `label` plus its CWE id, variant index and the
    /// patched counterpart.
    fn core(&mut self, label: Label, p: &str) -> (String, String, u32, usize) {
        let (dst, src) = (self.name(), self.name());
        let f = self.pick(MEMBERS);
        match label {
            Label::Buffer => match self.rng.gen_range(0..3) {
                0 => (
                    format!("strcpy({dst}, {src});\n"),
                    format!("strlcpy({dst}, {src}, sizeof({dst}));\n"),
                    120,
                    0,
                ),
                1 => (
                    format!("strncpy({dst}, {src}, strlen({src}) + 1);\n"),
                    format!("strlcpy({dst}, {src}, sizeof({dst}));\n"),
                    121,
                    1,
                ),
                _ => {
                    let reps = self.rng.gen_range(1..=2);
                    let mut bad = String::new();
                    let mut good = String::new();
                    for _ in 0..reps {
                        let f = self.pick(MEMBERS);
                        let k = self.pick(CONSTS);
                        let s = self.pick(&[src, k]);
                        bad.push_str(&format!("strncpy({p}->{f},\n\t{s},\n\tstrlen({s}) + 1);\n"));
                        good.push_str(&format!("strlcpy({p}->{f},\n\t{s},\n\tsizeof({p}->{f}));\n"));
                    }
                    (bad, good, 122, 2)
                }
            },
            Label::Memory => {
                let alloc = self.pick(ALLOCS);
                let (q, x, v) = (self.name(), self.name(), self.num());
                match self.rng.gen_range(0..3) {
                    0 => (
                        format!("{q} = {alloc}(sizeof(*{q}));\n{q}->{f} = {v};\n"),
                        format!("{q} = {alloc}(sizeof(*{q}));\nif ({q} == NULL)\n\treturn -1;\n{q}->{f} = {v};\n"),
                        476,
                        0,
                    ),
                    1 => (
                        format!("{q} = lookup_entry({src});\n{x} = {q}->{f};\n"),
                        format!("{q} = lookup_entry({src});\nif (!{q})\n\treturn 0;\n{x} = {q}->{f};\n"),
                        476,
                        1,
                    ),
                    _ => (
                        format!("{x} = {q}->{f};\nif (!{q})\n\treturn -1;\n"),
                        format!("if (!{q})\n\treturn -1;\n{x} = {q}->{f};\n"),
                        476,
                        2,
                    ),
                }
            }
            Label::Numerical => {
                let (t, arr, n) = (self.name(), self.name(), self.name());
                match self.rng.gen_range(0..3) {
                    0 => {
                        let alloc = self.pick(ALLOCS);
                        (
                            format!("size_t {t};\n{dst} = {alloc}({t}, GFP_KERNEL);\n"),
                            format!("size_t {t} = {n} * sizeof(*{dst});\n{dst} = {alloc}({t}, GFP_KERNEL);\n"),
                            457,
                            0,
                        )
                    }
                    1 => (
                        format!("{n} = atoi({src});\n{dst} = malloc({n} * sizeof(int));\nif (!{dst})\n\treturn -1;\n"),
                        format!("{n} = atoi({src});\nif ({n} <= 0 || {n} > {})\n\treturn -1;\n{dst} = malloc({n} * sizeof(int));\nif (!{dst})\n\treturn -1;\n", self.pick(CONSTS)),
                        20,
                        1,
                    ),
                    _ => (
                        format!("{t} = {arr}[{n}];\n"),
                        format!("if ({n} < 0 || {n} >= {})\n\treturn -1;\n{t} = {arr}[{n}];\n", self.pick(CONSTS)),
                        20,
                        2,
                    ),
                }
            }
            Label::Logic => {
                let (u, a) = (self.name(), self.name());
                let check = self.pick(&["is_admin", "has_access", "is_valid", "check_perm"]);
                let grant = self.pick(&["grant_access", "commit", "do_work", "update_state"]);
                match self.rng.gen_range(0..2) {
                    0 => (
                        format!("if (!{check}({u})) {{\n\t{grant}({u});\n}}\n"),
                        format!("if (!{check}({u}))\n\treturn -EPERM;\n{grant}({u});\n"),
                        670,
                        0,
                    ),
                    _ => {
                        let (lo, hi) = (self.num(), self.pick(CONSTS));
                        (
                            format!("if ({a} >= {lo} && {a} <= {hi})\n\treturn -EINVAL;\n"),
                            format!("if ({a} < {lo} || {a} > {hi})\n\treturn -EINVAL;\n"),
                            670,
                            1,
                        )
                    }
                }
            }
            Label::Clean => unreachable!("clean samples reuse buggy cores"),
        }
    }

    /// Validation, allocation and list setup ahead of filling in a freshly
    /// allocated kernel object, as in a driver's response builder.
    fn object_prologue(&mut self, obj: &str) -> String {
        let mut out = String::new();
        let log = self.log_call();
        out.push_str(&format!("if (strlen({}) > {}) {{\n\t{log}\treturn -1;\n}}\n", self.name(), self.pick(CONSTS)));
        let s = self.pick(STRUCTS);
        let alloc = self.pick(ALLOCS);
        let log = self.log_call();
        out.push_str(&format!("{obj} = {alloc}(sizeof(struct {s}), GFP_KERNEL);\nif (!{obj}) {{\n\t{log}\treturn -ENOMEM;\n}}\n"));
        out.push_str(&format!("INIT_LIST_HEAD(&{obj}->list);\n"));
        out
    }

    fn function(&mut self, label: Label) -> (String, Vec<u32>, String) {
        let (mut text, is_void) = self.signature();
        let mut body = String::new();
        body.push_str(&self.declaration());
        if self.chance(0.5) {
            body.push('\n');
        }

        // Setup of a fresh object, then the core at a stable offset after it,
        // the way the flaw sits in a test-suite case.
        let obj = self.name();
        body.push_str(&self.object_prologue(obj));
        let (core, cwe_ids, variant) = if label == Label::Clean {
            if self.chance(0.1) {
                (String::new(), vec![], "plain".to_string())
            } else {
                let from = self.pick(&[Label::Buffer, Label::Logic, Label::Memory, Label::Numerical]);
                let (_, patched, _, v) = self.core(from, obj);
                (patched, vec![], format!("patched-{}-{v}", from.as_str().to_lowercase()))
            }
        } else {
            let (bad, _, cwe, v) = self.core(label, obj);
            (bad, vec![cwe], v.to_string())
        };
        body.push_str(&core);

        if self.chance(0.5) {
            body.push_str(&self.filler());
        }
        if !is_void {
            body.push_str(match self.rng.gen_range(0..3) {
                0 => "return 0;\n",
                1 => "return ret;\n",
                _ => "return -1;\n",
            });
        }
        for line in body.lines() {
            if line.is_empty() {
                text.push('\n');
            } else {
                text.push('\t');
                text.push_str(line);
                text.push('\n');
            }
        }
        text.push_str("}\n");
        (text, cwe_ids, variant)
    }
}

/// `n_per_class` functions for each label, in class-index order, as a pure
/// function of `(n_per_class, seed)`.
pub fn generate_synthetic_corpus(n_per_class: usize, seed: u64, table: &TokenTable) -> Corpus {
    let mut gen = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut corpus = Corpus::new(table.fingerprint());
    for label in Label::ALL {
        for k in 0..n_per_class {
            let (source, cwe_ids, variant) = gen.function(label);
            let tokens = tokenize_ids(&source, table).expect("templates are well-formed C");
            corpus.samples.push(LabeledSample {
                source,
                tokens,
                cwe_ids,
                label,
                origin: format!("synthetic:{}:{variant}:{k}", label.as_str().to_lowercase()),
            });
        }
    }
    corpus
}
