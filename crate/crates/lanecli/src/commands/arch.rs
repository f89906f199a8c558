use std::path::PathBuf;

use lanefield::arch::{build_enet21, count_flops, ArchReport};
use serde::{Deserialize, Serialize};

use super::eval::Format;
use super::{emit, print_line, Command, Size};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Shapes,
    Params,
    Flops,
}

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct ArchArgs {
    /// Network input, WIDTHxHEIGHT.
    #[arg(long, default_value = "640x352")]
    pub input: Size,
    /// One bottleneck5 stack feeding all three output convs.
    #[arg(long)]
    pub shared_heads: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Section::Shapes, Section::Params, Section::Flops])]
    pub report: Vec<Section>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn report(a: &ArchArgs) -> CliResult<ArchReport> {
    let spec = build_enet21().with_shared_heads(a.shared_heads);
    Ok(count_flops(&spec, (3, a.input.height, a.input.width))?)
}

fn whc(d: Option<[usize; 3]>) -> String {
    d.map_or("-".into(), |[c, h, w]| format!("{w}x{h}x{c}"))
}

pub fn table(r: &ArchReport, sections: &[Section]) -> String {
    let has = |s| sections.contains(&s);
    let mut head = format!("{:>3}  {:<20}", "#", "layer");
    if has(Section::Shapes) {
        head += &format!("{:>14}", "output");
    }
    if has(Section::Params) {
        head += &format!("{:>10}", "params");
    }
    if has(Section::Flops) {
        head += &format!("{:>16}", "flops");
    }
    let mut lines = vec![head];
    for l in &r.per_layer {
        let mut s = format!("{:>3}  {:<20}", l.id, l.name);
        if has(Section::Shapes) {
            s += &format!("{:>14}", whc(l.output_dims));
        }
        if has(Section::Params) {
            s += &format!("{:>10}", l.params);
        }
        if has(Section::Flops) {
            s += &format!("{:>16}", l.flops);
        }
        lines.push(s);
    }
    if has(Section::Params) || has(Section::Flops) {
        let mut s = format!("{:>3}  {:<20}", "", "total");
        if has(Section::Shapes) {
            s += &format!("{:>14}", "");
        }
        if has(Section::Params) {
            s += &format!("{:>10}", r.total_params);
        }
        if has(Section::Flops) {
            s += &format!("{:>16}", r.total_flops);
        }
        lines.push(s);
        if has(Section::Params) {
            lines.push(format!("params {:.3}M", r.total_params as f64 / 1e6));
        }
        if has(Section::Flops) {
            lines.push(format!("flops  {:.3}G", r.total_flops as f64 / 1e9));
        }
    }
    lines.join("\n")
}

pub fn run(a: &ArchArgs) -> CliResult<()> {
    if a.report.is_empty() {
        return Err(CliError::input("--report needs at least one of shapes, params, flops"));
    }
    let r = report(a)?;
    let has = |s| a.report.contains(&s);
    let layers: Vec<serde_json::Value> = r
        .per_layer
        .iter()
        .map(|l| {
            let mut v = serde_json::json!({ "id": l.id, "name": l.name });
            if has(Section::Shapes) {
                v["output"] = serde_json::json!(whc(l.output_dims));
            }
            if has(Section::Params) {
                v["params"] = l.params.into();
            }
            if has(Section::Flops) {
                v["flops"] = l.flops.into();
            }
            v
        })
        .collect();
    let mut body = serde_json::json!({
        "version": crate::manifest::VERSION,
        "config": { "input": a.input, "shared_heads": a.shared_heads, "report": a.report },
        "layers": layers,
    });
    if has(Section::Params) {
        body["total_params"] = r.total_params.into();
    }
    if has(Section::Flops) {
        body["total_flops"] = r.total_flops.into();
    }
    if a.format == Format::Table {
        print_line(table(&r, &a.report))?;
    }
    emit(Command::Arch(a.clone()), &body, a.out.as_deref(), None, vec![], a.format == Format::Json)
}
