//! Loads the bundled scenarios, prints the catalog, splits one pathway into
//! sectors and writes a CO2-equivalent copy to a temporary directory.

use tempalign::scenario::{disaggregate_sectors, load_scenario, write_scenario};
use tempalign::DataBundle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = DataBundle::locate()?;
    let store = bundle.scenarios()?;
    for info in store.catalog() {
        println!(
            "{:<12} {:?} {}-{} {} gases",
            info.id, info.schema, info.first_year, info.last_year, info.n_gases
        );
    }

    let s = store.get("SSP2-RCP4.5").ok_or("missing SSP2-RCP4.5")?;
    let shares = bundle.sector_shares()?;
    let sectors = disaggregate_sectors(&s, &shares)?;
    let i = s.pathway.index_of_year(2022).ok_or("2022 not in pathway")?;
    let total = s.pathway.schema().co2e_total(s.pathway.row(i));
    println!("\n2022 CO2e {total:.2} Gt split by sector:");
    for (name, p) in &sectors {
        let v = p.schema().co2e_total(p.row(i));
        println!("  {name:<28} {v:>8.3} Gt ({:.1}%)", 100.0 * v / total);
    }

    let co2e = s.to_co2e();
    let dir = std::env::temp_dir().join("tempalign-scenarios");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("SSP2-RCP4.5-co2e.csv");
    write_scenario(&co2e, &path)?;
    let back = load_scenario(&path, co2e.pathway.schema())?;
    println!(
        "\nwrote {} ({} years, {} column); round trip equal: {}",
        path.display(),
        back.pathway.len(),
        back.pathway.n_gases(),
        back.pathway == co2e.pathway
    );
    Ok(())
}
