//! Built-in catalog: geometries, weight kinds, family kinds and experiment
//! kinds with their parameter schemas. The catalog is static, so its output
//! is byte-identical across runs.

use serde::Serialize;

#[derive(Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub parameters: &'static [&'static str],
    pub summary: &'static str,
}

#[derive(Serialize)]
pub struct Catalog {
    pub geometries: Vec<CatalogEntry>,
    pub weights: Vec<CatalogEntry>,
    pub families: Vec<CatalogEntry>,
    pub experiments: Vec<CatalogEntry>,
}

pub fn catalog() -> Catalog {
    Catalog {
        geometries: vec![
            CatalogEntry {
                name: "circle",
                parameters: &["length", "twist (0 | 0.5)", "resolution (even, >= 8)"],
                summary: "spin circle; twist 0 = periodic spinors, 0.5 = antiperiodic",
            },
            CatalogEntry {
                name: "interval",
                parameters: &["length", "chirality (1 | -1)", "resolution (even, >= 8)"],
                summary: "interval with the chiral boundary condition B+ psi = 0 at both ends",
            },
            CatalogEntry {
                name: "torus",
                parameters: &["lengths = [L1, L2]", "twists = [d1, d2] (0 | 0.5)", "resolution (even, >= 8)"],
                summary: "flat 2-torus on the twist-shifted Fourier lattice",
            },
        ],
        weights: vec![
            CatalogEntry { name: "identity", parameters: &[], summary: "A = Id" },
            CatalogEntry {
                name: "constant",
                parameters: &["value (> 0)"],
                summary: "A = value * Id",
            },
            CatalogEntry {
                name: "exp-sin",
                parameters: &["amplitude", "frequency"],
                summary: "A = exp(amplitude * sin(frequency * theta)) * Id",
            },
            CatalogEntry {
                name: "sine",
                parameters: &["amplitude", "frequency"],
                summary: "A = (1 + amplitude * sin(frequency * theta)) * Id",
            },
            CatalogEntry {
                name: "cosine",
                parameters: &["amplitude", "frequency"],
                summary: "A = (1 + amplitude * cos(frequency * theta)) * Id",
            },
            CatalogEntry {
                name: "diag",
                parameters: &["entries = [d1, d2]"],
                summary: "constant diagonal endomorphism on a 2-dimensional fiber",
            },
        ],
        families: vec![
            CatalogEntry {
                name: "oscillatory-sine",
                parameters: &["amplitude (|a| < 1)", "members"],
                summary: "rho_m = 1 + a sin(m theta), weak limit 1",
            },
            CatalogEntry {
                name: "oscillatory-squared",
                parameters: &["amplitude", "members"],
                summary: "rho_m = 1 + a sin^2(m theta), weak limit 1 + a/2",
            },
            CatalogEntry {
                name: "conformal-exp",
                parameters: &["amplitude", "members"],
                summary: "A_m = exp(a sin(m theta) / m) Id, limit Id",
            },
            CatalogEntry {
                name: "random-spd-perturbation",
                parameters: &["amplitude", "members", "seed"],
                summary: "A_m = Id + S/m for a seeded bounded Hermitian field S",
            },
        ],
        experiments: vec![
            CatalogEntry {
                name: "spectrum",
                parameters: &["[geometry]", "[weight]", "[solver]"],
                summary: "solve D phi = lambda A phi; write spectra.csv and an eigenvector dump",
            },
            CatalogEntry {
                name: "minmax",
                parameters: &["[geometry]", "[weight]", "[solver] (tol, n_samples)"],
                summary: "verify the dual min-max characterizations; nonzero exit on verdict failure",
            },
            CatalogEntry {
                name: "continuity",
                parameters: &["[geometry]", "[family]", "[solver]"],
                summary: "eigenvalue/eigenspace/projector continuity tables along a weight family",
            },
            CatalogEntry {
                name: "compare",
                parameters: &["[geometry]", "[weight] (A1)", "[weight2] (A2)"],
                summary: "eigenvalue comparison for Loewner-ordered weights on kernel-free geometries",
            },
            CatalogEntry {
                name: "wave",
                parameters: &["[geometry]", "[family]", "[wave] (times, index_window)"],
                summary: "wave-propagator matrix elements along a family",
            },
        ],
    }
}

/// Human-readable catalog text.
pub fn render_text() -> String {
    let c = catalog();
    let mut out = String::new();
    for (title, entries) in [
        ("geometries:", &c.geometries),
        ("weights:", &c.weights),
        ("families:", &c.families),
        ("experiments:", &c.experiments),
    ] {
        out.push_str(title);
        out.push('\n');
        for e in entries {
            out.push_str(&format!("  {:24} {}\n", e.name, e.summary));
            if !e.parameters.is_empty() {
                out.push_str(&format!("  {:24} parameters: {}\n", "", e.parameters.join(", ")));
            }
        }
    }
    out
}

/// Machine-readable catalog (JSON), same content as the text form.
pub fn render_machine() -> String {
    serde_json::to_string_pretty(&catalog()).expect("catalog serialization")
}
