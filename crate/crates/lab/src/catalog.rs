//! The bundled experiment catalog: one config per headline check,
//! embedded in the binary so `catalog --write` works from anywhere.

pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "lp_inequality_1d",
        summary: "main L^p energy inequality, 10^3 random fields per p in {2,3,4}",
        text: include_str!("../../../catalog/lp_inequality_1d.conf"),
    },
    CatalogEntry {
        name: "l2_inequality_1d",
        summary: "L^2 energy inequality at the omega_N*C4 constant",
        text: include_str!("../../../catalog/l2_inequality_1d.conf"),
    },
    CatalogEntry {
        name: "derivative_inequality_1d",
        summary: "derivative inequality D_2(D^k u), k in {0,1,2}",
        text: include_str!("../../../catalog/derivative_inequality_1d.conf"),
    },
    CatalogEntry {
        name: "gradient_inequality_2d",
        summary: "gradient inequality in two dimensions",
        text: include_str!("../../../catalog/gradient_inequality_2d.conf"),
    },
    CatalogEntry {
        name: "lp_decay_1d",
        summary: "L^p decay-envelope domination and late-time slope",
        text: include_str!("../../../catalog/lp_decay_1d.conf"),
    },
    CatalogEntry {
        name: "derivative_decay_1d",
        summary: "derivative decay-envelope domination (k = 1)",
        text: include_str!("../../../catalog/derivative_decay_1d.conf"),
    },
    CatalogEntry {
        name: "heat_rescaling_1d",
        summary: "heat-scaling sweep with eps-independent envelope",
        text: include_str!("../../../catalog/heat_rescaling_1d.conf"),
    },
    CatalogEntry {
        name: "relative_entropy_1d",
        summary: "general relative entropy monotone for the convex catalog",
        text: include_str!("../../../catalog/relative_entropy_1d.conf"),
    },
    CatalogEntry {
        name: "dispersal_decay_1d",
        summary: "dispersal equilibrium and relative-entropy decay certificate",
        text: include_str!("../../../catalog/dispersal_decay_1d.conf"),
    },
    CatalogEntry {
        name: "absorbing_source_1d",
        summary: "nonlinear absorbing source decays at least as fast as linear",
        text: include_str!("../../../catalog/absorbing_source_1d.conf"),
    },
];

pub fn find(name: &str) -> Option<&'static CatalogEntry> {
    ENTRIES.iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_pipeline, RawConfig};

    #[test]
    fn every_entry_parses_and_names_match() {
        for entry in ENTRIES {
            let raw = RawConfig::parse(entry.text, entry.name).unwrap();
            parse_pipeline(&raw).unwrap();
            assert_eq!(raw.get("label"), Some(entry.name));
        }
    }
}
