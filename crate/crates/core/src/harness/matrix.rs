use serde::{Deserialize, Serialize};

use super::config::{Budget, RunConfig};
use super::runner::{load_bundle, run_on_bundle, RunResult};
use super::Error;
use crate::model::Objective;

/// Final test metrics, one row per target budget and one column per
/// objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixTable {
    pub metric: String,
    pub budgets: Vec<Budget>,
    pub objectives: Vec<Objective>,
    /// `cells[b][o]`
    pub cells: Vec<Vec<f64>>,
}

impl MatrixTable {
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "target_budget\t{}\n",
            self.objectives.iter().map(|o| o.name()).collect::<Vec<_>>().join("\t")
        );
        for (b, row) in self.budgets.iter().zip(&self.cells) {
            let values: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
            out.push_str(&format!("{b}\t{}\n", values.join("\t")));
        }
        out
    }
}

/// Seed of cell `(b, o)`: the base seed plus the cell's row-major index.
pub fn cell_seed(base: u64, budget_index: usize, objective_index: usize, n_objectives: usize) -> u64 {
    base + (budget_index * n_objectives + objective_index) as u64
}

/// Runs every (budget, objective) cell of the grid on one shared data
/// bundle and tabulates the task's primary metric, followed by its
/// secondary metric when it has one.
///
/// Cell runs write into `<output_dir>/<budget>_<objective>` when an output
/// directory is configured, and each table goes to `matrix_<metric>.tsv`.
pub fn run_matrix(
    base: &RunConfig,
    budgets: &[Budget],
    objectives: &[Objective],
) -> Result<(Vec<MatrixTable>, Vec<RunResult>), Error> {
    if budgets.is_empty() || objectives.is_empty() {
        return Err(Error::Config(
            "the matrix needs at least one budget and one objective".into(),
        ));
    }
    base.validate()?;
    let bundle = load_bundle(base)?;
    for b in budgets {
        if let Some(n) = b.limit() {
            if n > bundle.target_labeled.len() {
                return Err(Error::Config(format!(
                    "target budget {n} exceeds the {} labeled target sentences available",
                    bundle.target_labeled.len()
                )));
            }
        }
    }
    let mut cells = Vec::with_capacity(budgets.len());
    let mut secondary_cells = Vec::with_capacity(budgets.len());
    let mut results = Vec::new();
    for (bi, &budget) in budgets.iter().enumerate() {
        let mut row = Vec::with_capacity(objectives.len());
        let mut secondary_row = Vec::with_capacity(objectives.len());
        for (oi, &objective) in objectives.iter().enumerate() {
            let mut cfg = base.clone();
            cfg.target_budget = budget;
            cfg.adversarial.objective = objective;
            cfg.seed = cell_seed(base.seed, bi, oi, objectives.len());
            cfg.output_dir = base
                .output_dir
                .as_ref()
                .map(|d| d.join(format!("{budget}_{objective}")));
            let (result, _) = run_on_bundle(&cfg, &bundle)?;
            row.push(result.final_test.primary);
            secondary_row.push(result.final_test.secondary);
            results.push(result);
        }
        cells.push(row);
        secondary_cells.push(secondary_row);
    }
    let (primary, secondary) = super::runner::metric_names(base.task);
    let table = |metric: &str, cells| MatrixTable {
        metric: metric.to_string(),
        budgets: budgets.to_vec(),
        objectives: objectives.to_vec(),
        cells,
    };
    let mut tables = vec![table(primary, cells)];
    if let Some(name) = secondary {
        let complete: Option<Vec<Vec<f64>>> = secondary_cells
            .into_iter()
            .map(|row| row.into_iter().collect())
            .collect();
        if let Some(c) = complete {
            tables.push(table(name, c));
        }
    }
    if let Some(dir) = &base.output_dir {
        for t in &tables {
            let path = dir.join(format!("matrix_{}.tsv", t.metric));
            std::fs::write(&path, t.to_tsv()).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok((tables, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_layout() {
        let t = MatrixTable {
            metric: "las".into(),
            budgets: vec![Budget::Count(0), Budget::All],
            objectives: vec![Objective::None, Objective::Gr],
            cells: vec![vec![63.35, 64.25], vec![80.0, 80.68]],
        };
        assert_eq!(
            t.to_tsv(),
            "target_budget\tnone\tgr\n0\t63.35\t64.25\nall\t80.00\t80.68\n"
        );
    }

    #[test]
    fn seeds_follow_cell_index() {
        assert_eq!(cell_seed(10, 0, 0, 4), 10);
        assert_eq!(cell_seed(10, 1, 2, 4), 16);
    }
}
