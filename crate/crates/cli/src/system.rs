//! Turns a [`SystemSource`] into a planar field and its standard forms.

use std::collections::BTreeMap;
use std::sync::Arc;

use pwavg::examples::{build_example, ExampleInstance, ExampleParams};
use pwavg::model::expr::ExprField;
use pwavg::model::{
    polar_standard_form, Domain, PiecewiseStandardSystem, PlanarComponent, PlanarPiecewiseField, SectorPartition,
};

use crate::config::{Settings, SystemSource, SystemTable};
use crate::CliError;

pub enum LoadedSystem {
    Builtin(ExampleInstance),
    Expressions {
        planar: Arc<PlanarPiecewiseField>,
        domain: Domain,
    },
}

impl LoadedSystem {
    pub fn load(settings: &Settings) -> Result<Self, CliError> {
        // flags, then the system table, then the built-in default
        let resolve = |default: Option<Domain>| -> Result<Domain, CliError> {
            let lo = settings
                .rho_min
                .or(settings.system_domain.map(|d| d.0))
                .or(default.map(|d| d.min));
            let hi = settings
                .rho_max
                .or(settings.system_domain.map(|d| d.1))
                .or(default.map(|d| d.max));
            match (lo, hi) {
                (Some(lo), Some(hi)) => Ok(Domain::new(lo, hi)?),
                _ => Err(CliError::Config(
                    "an expression system needs `domain` or rho-min/rho-max".into(),
                )),
            }
        };
        match &settings.system {
            SystemSource::Builtin { id, params } => {
                let params = match params {
                    Some(src) => ExampleParams::parse(*id, src)?,
                    None => ExampleParams::default_for(*id),
                };
                let inst = build_example(*id, &params)?;
                let domain = resolve(Some(id.default_domain()))?;
                Ok(LoadedSystem::Builtin(inst.with_domain(domain)?))
            }
            SystemSource::Expressions(table) => {
                let planar = expression_field(table)?;
                let domain = resolve(None)?;
                for r in domain.grid(5) {
                    planar
                        .check_transversal(r, 256)
                        .map_err(|e| CliError::Config(format!("the system fails transversality: {e}")))?;
                }
                Ok(LoadedSystem::Expressions { planar, domain })
            }
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            LoadedSystem::Builtin(inst) => inst.standard().domain(),
            LoadedSystem::Expressions { domain, .. } => *domain,
        }
    }

    pub fn planar(&self) -> &Arc<PlanarPiecewiseField> {
        match self {
            LoadedSystem::Builtin(inst) => inst.planar(),
            LoadedSystem::Expressions { planar, .. } => planar,
        }
    }

    pub fn builtin(&self) -> Option<&ExampleInstance> {
        match self {
            LoadedSystem::Builtin(inst) => Some(inst),
            LoadedSystem::Expressions { .. } => None,
        }
    }

    /// Standard form truncated at order `k`.
    pub fn standard(&self, k: usize) -> Result<PiecewiseStandardSystem, CliError> {
        Ok(match self {
            LoadedSystem::Builtin(inst) => inst.clone().with_order(k)?.standard().clone(),
            LoadedSystem::Expressions { planar, domain } => polar_standard_form(planar, *domain)?.with_order(k)?,
        })
    }
}

fn expression_field(table: &SystemTable) -> Result<Arc<PlanarPiecewiseField>, CliError> {
    let n = table.sector.len();
    if let Some(declared) = table.n {
        if declared != n {
            return Err(CliError::Config(format!("n = {declared} but {n} sectors are listed")));
        }
    }
    let partition = match &table.alphas {
        Some(values) => {
            let alphas = values.iter().map(|v| v.to_f64()).collect::<Result<Vec<_>, _>>()?;
            if alphas.len() != n + 1 {
                return Err(CliError::Config(format!(
                    "{} alphas for {n} sectors (expected alpha_0 = 0 through alpha_n = 2*pi)",
                    alphas.len()
                )));
            }
            SectorPartition::new(alphas)?
        }
        None => SectorPartition::uniform(n)?,
    };
    let constants = table
        .constants
        .iter()
        .map(|(name, v)| Ok((name.clone(), v.to_f64()?)))
        .collect::<Result<BTreeMap<_, _>, CliError>>()?;
    let mut rows = Vec::with_capacity(n);
    let mut longest = 0;
    for (j, s) in table.sector.iter().enumerate() {
        if s.xdot.len() != s.ydot.len() || s.xdot.is_empty() {
            return Err(CliError::Config(format!(
                "sector {}: xdot and ydot must list the same, nonzero number of orders",
                j + 1
            )));
        }
        longest = longest.max(s.xdot.len());
        let row = s
            .xdot
            .iter()
            .zip(&s.ydot)
            .map(|(x, y)| {
                let field = ExprField::parse(x, y, &constants)
                    .map_err(|e| CliError::Config(format!("sector {}: {e}", j + 1)))?;
                Ok(Some(Arc::new(field) as Arc<dyn PlanarComponent>))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        rows.push(row);
    }
    let k = table.k.unwrap_or(longest - 1);
    Ok(Arc::new(PlanarPiecewiseField::new(partition, rows, k)?))
}
