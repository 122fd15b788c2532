use crate::discretization::{Field, Grid, SchrodingerOperator};
use crate::error::Result;
use crate::model::{make_potential, PotentialChecks, PotentialSpec, ProblemParams};

/// A discretized instance: grid, potential, exponent, and the factored operator.
#[derive(Debug, Clone)]
pub struct Problem {
    op: SchrodingerOperator,
    params: ProblemParams,
    checks: Option<PotentialChecks>,
}

impl Problem {
    pub fn new(grid: &Grid, potential: &Field, p: f64, v_inf: f64) -> Result<Self> {
        let params = ProblemParams::new(p, grid.dimension(), v_inf)?;
        let op = SchrodingerOperator::new(grid, potential)?;
        Ok(Problem {
            op,
            params,
            checks: None,
        })
    }

    pub fn from_spec(grid: &Grid, spec: &PotentialSpec, p: f64) -> Result<Self> {
        let params = ProblemParams::new(p, grid.dimension(), spec.v_inf())?;
        let potential = make_potential(spec, grid)?;
        let op = SchrodingerOperator::new(grid, &potential.field)?;
        Ok(Problem {
            op,
            params,
            checks: Some(potential.checks),
        })
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn potential(&self) -> &Field {
        self.op.potential()
    }

    pub fn operator(&self) -> &SchrodingerOperator {
        &self.op
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    pub fn v_inf(&self) -> f64 {
        self.params.v_inf
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn potential_checks(&self) -> Option<&PotentialChecks> {
        self.checks.as_ref()
    }
}
