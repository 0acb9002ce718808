//! Fixtures shared by unit tests.

use crate::data::{
    ColumnKind, ColumnRole, ColumnSpec, Dataset, Group, GroupRule, Schema, SensitiveSpec,
    TargetSpec,
};

/// Numeric-feature dataset; even rows are group A.
pub fn numeric_dataset(rows: &[Vec<f64>], labels: &[u8]) -> Dataset {
    let d = rows[0].len();
    let mut columns: Vec<ColumnSpec> = (0..d)
        .map(|j| ColumnSpec {
            name: format!("x{j}"),
            kind: ColumnKind::Numeric,
            role: ColumnRole::Feature,
            codes: vec![],
        })
        .collect();
    columns.push(ColumnSpec {
        name: "y".into(),
        kind: ColumnKind::Numeric,
        role: ColumnRole::Target,
        codes: vec![],
    });
    columns.push(ColumnSpec {
        name: "g".into(),
        kind: ColumnKind::Categorical,
        role: ColumnRole::Sensitive,
        codes: vec![],
    });
    let schema = Schema::new(
        columns,
        TargetSpec::default(),
        SensitiveSpec {
            rule: GroupRule::Equals { value: "a".into() },
            group_a: "a".into(),
            group_b: "b".into(),
            as_feature: false,
        },
    )
    .unwrap();
    let n = rows.len();
    let groups: Vec<Group> = (0..n)
        .map(|i| if i % 2 == 0 { Group::A } else { Group::B })
        .collect();
    Dataset::from_parts(
        schema,
        rows.concat(),
        labels.to_vec(),
        groups,
        vec![0.0; n],
        None,
    )
    .unwrap()
}
