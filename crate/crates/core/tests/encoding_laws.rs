mod common;

use common::*;
use rand::Rng;
use snpsvm::{build_panel, diff, encode_feature, DiffTable, Genotype, SampleRecord, SnpId};

const ALL: [Genotype; 3] = [Genotype::WW, Genotype::WM, Genotype::MM];

#[test]
fn default_table_over_all_nine_pairs() {
    let table = DiffTable::default();
    for a in ALL {
        for b in ALL {
            let d = diff(a, b, &table);
            assert_eq!(d, diff(b, a, &table), "{a}/{b} not symmetric");
            assert!((0.0..=1.0).contains(&d));
            if a == b {
                assert_eq!(d, 0.0);
            }
        }
    }
    assert_eq!(diff(Genotype::WW, Genotype::WM, &table), 0.25);
    assert_eq!(diff(Genotype::WM, Genotype::MM, &table), 0.75);
    assert_eq!(diff(Genotype::WW, Genotype::MM, &table), 1.0);
}

fn random_genotype(r: &mut impl Rng) -> Genotype {
    ALL[r.gen_range(0..3)]
}

#[test]
fn encoding_equals_mean_over_raw_panel_records() {
    let mut r = rng(404);
    for panel_no in 0..100 {
        let n = r.gen_range(1..=5);
        let members = r.gen_range(1..=25);
        let snps: Vec<SnpId> = (0..n).map(|k| SnpId::new(format!("rs{k}")).unwrap()).collect();
        let records: Vec<SampleRecord> = (0..members)
            .map(|m| SampleRecord {
                sample_id: format!("p{m}"),
                label: None,
                genotypes: (0..n).map(|_| random_genotype(&mut r)).collect(),
            })
            .collect();
        let table = if panel_no % 2 == 0 {
            DiffTable::default()
        } else {
            DiffTable::new(r.gen(), r.gen(), r.gen()).unwrap()
        };
        let panel = build_panel(&snps, &records).unwrap();
        for j in 0..n {
            for g in ALL {
                let brute = records.iter().map(|rec| diff(g, rec.genotypes[j], &table)).sum::<f64>()
                    / members as f64;
                let encoded = encode_feature(g, j, &panel, &table).unwrap();
                assert!(
                    (encoded - brute).abs() <= 1e-12,
                    "panel {panel_no} snp {j} {g}: {encoded} vs {brute}"
                );
            }
        }
    }
}
