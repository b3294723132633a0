//! Output documents.

use std::collections::BTreeMap;

use agler_core::kernel::AdmissibilityReport;
use agler_core::realize::{verify_certificate, verify_witness};
use agler_core::wire::{self, KernelDoc, Matrix, SCHEMA};
use agler_core::{AglerCertificate, DecomposeOutcome, DefectData, MultiIndex, Preordering, Status, Witness};
use serde::Serialize;

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema: &'static str,
    pub command: &'a str,
    #[serde(flatten)]
    pub body: T,
}

pub fn render<T: Serialize>(command: &str, body: T) -> agler_core::Result<String> {
    wire::to_json(&Envelope { schema: SCHEMA, command, body })
}

#[derive(Serialize)]
pub struct CertificateDoc {
    pub level: f64,
    pub residual: f64,
    pub min_eigenvalue: f64,
    /// Keyed by the comma-separated multi-index.
    pub gammas: BTreeMap<String, KernelDoc>,
}

impl CertificateDoc {
    pub fn from_certificate(cert: &AglerCertificate) -> Self {
        CertificateDoc {
            level: cert.level,
            residual: cert.residual,
            min_eigenvalue: cert.min_eigenvalue,
            gammas: cert.gammas.iter().map(|(l, k)| (l.key(), KernelDoc::from_kernel(k))).collect(),
        }
    }

    fn reload(&self) -> agler_core::Result<AglerCertificate> {
        let gammas = self
            .gammas
            .iter()
            .map(|(key, doc)| Ok((MultiIndex::parse_key(key)?, doc.to_kernel()?)))
            .collect::<agler_core::Result<Vec<_>>>()?;
        Ok(AglerCertificate { gammas, residual: self.residual, min_eigenvalue: self.min_eigenvalue, level: self.level })
    }
}

#[derive(Serialize)]
pub struct LambdaMargin {
    pub lambda: MultiIndex,
    pub min_eigenvalue: f64,
}

#[derive(Serialize)]
pub struct AdmissibilityDoc {
    pub admissible: bool,
    pub kernel_min_eigenvalue: f64,
    pub checks: Vec<LambdaMargin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<ViolationDoc>,
}

#[derive(Serialize)]
pub struct ViolationDoc {
    pub lambda: MultiIndex,
    pub vector: Vec<wire::Complex>,
}

impl AdmissibilityDoc {
    pub fn from_report(r: &AdmissibilityReport) -> Self {
        AdmissibilityDoc {
            admissible: r.admissible,
            kernel_min_eigenvalue: r.kernel_min_eigenvalue,
            checks: r
                .checks
                .iter()
                .map(|c| LambdaMargin { lambda: c.lambda.clone(), min_eigenvalue: c.min_eigenvalue })
                .collect(),
            violation: r.violation.as_ref().map(|(lambda, v)| ViolationDoc {
                lambda: lambda.clone(),
                vector: v.iter().copied().map(wire::complex_to).collect(),
            }),
        }
    }
}

#[derive(Serialize)]
pub struct WitnessDoc {
    pub pairing: f64,
    pub kernel: KernelDoc,
    pub admissibility: AdmissibilityDoc,
}

impl WitnessDoc {
    pub fn from_witness(w: &Witness) -> Self {
        WitnessDoc {
            pairing: w.pairing,
            kernel: KernelDoc::from_kernel(&w.kernel),
            admissibility: AdmissibilityDoc::from_report(&w.admissibility),
        }
    }
}

/// A feasibility decision, with whatever proves it.
#[derive(Serialize)]
pub struct DecisionDoc {
    pub status: Status,
    pub level: f64,
    pub iterations: usize,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl DecisionDoc {
    /// Serializes the proof, reloads it from its serialized form and re-runs the soundness checks.
    /// A proof that does not survive is dropped and the decision becomes unresolved.
    pub fn checked(
        outcome: &DecomposeOutcome,
        level: f64,
        data: &DefectData,
        pre: &Preordering,
        feas_tol: f64,
    ) -> Self {
        let mut doc = DecisionDoc {
            status: outcome.status(),
            level,
            iterations: outcome.iterations,
            residual: outcome.residual,
            certificate: outcome.certificate().map(CertificateDoc::from_certificate),
            witness: outcome.witness().map(WitnessDoc::from_witness),
            note: None,
        };
        if let Some(cert) = &doc.certificate {
            if let Err(e) = cert.reload().and_then(|c| verify_certificate(&c, data, feas_tol)) {
                doc.demote(format!("certificate failed re-validation: {e}"));
            }
        }
        if let Some(w) = &doc.witness {
            let reloaded = w.kernel.to_kernel().and_then(|k| verify_witness(&k, data, pre, feas_tol));
            if let Err(e) = reloaded {
                doc.demote(format!("witness failed re-validation: {e}"));
            }
        }
        doc
    }

    fn demote(&mut self, why: String) {
        self.status = Status::Unresolved;
        self.certificate = None;
        self.witness = None;
        self.note = Some(why);
    }

    pub fn exit_code(&self) -> u8 {
        self.status.exit_code() as u8
    }
}

pub fn matrices(values: &[agler_core::CMat]) -> Vec<Matrix> {
    values.iter().map(wire::matrix_to).collect()
}
