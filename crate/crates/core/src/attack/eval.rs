use std::io::Write;

use serde::{Deserialize, Serialize};

use super::obfuscator::Obfuscator;
use crate::data::Embedding;
use crate::models::ClassifierModel;
use crate::{Error, Result};

/// Accuracies for one public class; `None` when the class has no test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityRow {
    pub public_class: usize,
    pub count: usize,
    pub public_before: Option<f64>,
    pub public_after: Option<f64>,
    pub private_before: Option<f64>,
    pub private_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityPrivacyTable {
    pub rows: Vec<UtilityRow>,
    /// Averages weighted by per-class embedding counts.
    pub weighted: UtilityRow,
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |a| format!("{:.2}", 100.0 * a))
}

impl UtilityPrivacyTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::invalid(e.to_string());
        out.write_record([
            "public_class",
            "embeddings",
            "public_before",
            "public_after",
            "private_before",
            "private_after",
        ])
        .map_err(err)?;
        for r in self.rows.iter().chain(std::iter::once(&self.weighted)) {
            let name = if std::ptr::eq(r, &self.weighted) {
                "weighted".to_owned()
            } else {
                r.public_class.to_string()
            };
            let cell = |v: Option<f64>| v.map_or_else(String::new, |a| a.to_string());
            out.write_record([
                name,
                r.count.to_string(),
                cell(r.public_before),
                cell(r.public_after),
                cell(r.private_before),
                cell(r.private_after),
            ])
            .map_err(err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Plain-text table with percentages.
    pub fn render(&self, public_names: &[String]) -> String {
        let mut s = format!(
            "{:<12} {:>10} {:>14} {:>14} {:>14} {:>14}\n",
            "class", "embeddings", "public before", "public after", "private before", "private after"
        );
        let line = |name: &str, r: &UtilityRow| {
            format!(
                "{:<12} {:>10} {:>14} {:>14} {:>14} {:>14}\n",
                name,
                r.count,
                fmt_pct(r.public_before),
                fmt_pct(r.public_after),
                fmt_pct(r.private_before),
                fmt_pct(r.private_after)
            )
        };
        for r in &self.rows {
            let name = public_names
                .get(r.public_class)
                .cloned()
                .unwrap_or_else(|| r.public_class.to_string());
            s.push_str(&line(&name, r));
        }
        s.push_str(&line("weighted", &self.weighted));
        s
    }
}

/// Scores both classifiers before and after obfuscation, per true public
/// class and weighted by class size.
pub fn evaluate_utility_privacy(
    ob: &mut (dyn Obfuscator + '_),
    test: &[Embedding],
    public: &ClassifierModel,
    private: &ClassifierModel,
    public_classes: usize,
) -> Result<UtilityPrivacyTable> {
    if test.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    // hits[u] = [public before, public after, private before, private after]
    let mut hits = vec![[0usize; 4]; public_classes];
    let mut counts = vec![0usize; public_classes];
    for (k, e) in test.iter().enumerate() {
        if e.public >= public_classes {
            return Err(Error::invalid(format!("embedding {k} has public class {}", e.public)));
        }
        let y = ob.obfuscate(&e.x).map_err(|err| Error::at(k, err))?;
        let h = &mut hits[e.public];
        h[0] += (public.predict(&e.x)? == e.public) as usize;
        h[1] += (public.predict(&y)? == e.public) as usize;
        h[2] += (private.predict(&e.x)? == e.private) as usize;
        h[3] += (private.predict(&y)? == e.private) as usize;
        counts[e.public] += 1;
    }
    let rows: Vec<UtilityRow> = (0..public_classes)
        .map(|u| {
            let acc = |j: usize| (counts[u] > 0).then(|| hits[u][j] as f64 / counts[u] as f64);
            UtilityRow {
                public_class: u,
                count: counts[u],
                public_before: acc(0),
                public_after: acc(1),
                private_before: acc(2),
                private_after: acc(3),
            }
        })
        .collect();
    let total: usize = counts.iter().sum();
    let weighted_of = |f: fn(&UtilityRow) -> Option<f64>| {
        Some(
            rows.iter()
                .filter_map(|r| f(r).map(|a| a * r.count as f64))
                .sum::<f64>()
                / total as f64,
        )
    };
    let weighted = UtilityRow {
        public_class: public_classes,
        count: total,
        public_before: weighted_of(|r| r.public_before),
        public_after: weighted_of(|r| r.public_after),
        private_before: weighted_of(|r| r.private_before),
        private_after: weighted_of(|r| r.private_after),
    };
    Ok(UtilityPrivacyTable { rows, weighted })
}
