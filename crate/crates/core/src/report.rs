//! Persistence: report documents, JSON with fixed-width floats, and the
//! CSV exports consumed by plotting tools.
//!
//! Every float is printed with 17 significant digits so files round-trip
//! bit for bit; rendering depends only on the data, never on wall-clock
//! state, which is what makes repeated runs byte-identical.

use crate::config::RunConfig;
use crate::cross_section::SpectralPair;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::ChannelGrid;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use std::io;
use std::path::Path;

/// One float with 17 significant digits; parses back to the same bits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON whose numbers carry 17 significant digits. Non-finite
/// values serialize as null.
struct ReportFormatter<'a> {
    pretty: PrettyFormatter<'a>,
}

impl Formatter for ReportFormatter<'_> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_object_value(writer)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let formatter = ReportFormatter {
        pretty: PrettyFormatter::new(),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, formatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// `eigs.csv`: one row per eigenvalue, 1-based index.
pub fn write_eigs_csv(path: &Path, pairs: &[SpectralPair]) -> Result<()> {
    let mut out = String::from("j,lambda\n");
    for p in pairs {
        out.push_str(&format!("{},{}\n", p.index, format_float(p.eigenvalue)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// `wave.csv`: row-major in x then cross node, boundary rows included.
/// Interval cross sections get columns `x,y,u`; rectangles `x,y1,y2,u`.
pub fn write_wave_csv(path: &Path, grid: &ChannelGrid, field: &Field) -> Result<()> {
    if field.len() != grid.total_nodes() {
        return Err(Error::mismatch("field size does not match the grid"));
    }
    let nc = grid.cross.total_nodes();
    let mut out = String::new();
    out.push_str(wave_header(grid));
    out.push('\n');
    let values = field.values();
    for ix in 0..grid.axial_nodes {
        let x = format_float(grid.x(ix));
        for ic in 0..nc {
            out.push_str(&x);
            for coord in grid.cross.coordinate(ic) {
                out.push(',');
                out.push_str(&format_float(coord));
            }
            out.push(',');
            out.push_str(&format_float(values[ix * nc + ic]));
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn wave_header(grid: &ChannelGrid) -> &'static str {
    match grid.cross.dim() {
        1 => "x,y,u",
        _ => "x,y1,y2,u",
    }
}

/// Read a `wave.csv` back against the grid it claims to discretize.
/// Any disagreement in header, row count, or coordinates is an artifact
/// mismatch.
pub fn read_wave_csv(path: &Path, grid: &ChannelGrid) -> Result<Field> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::mismatch(format!("cannot read wave file {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != wave_header(grid) {
        return Err(Error::mismatch(format!(
            "wave file header {header:?} does not match the configured cross section"
        )));
    }
    let nc = grid.cross.total_nodes();
    let dim = grid.cross.dim();
    let mut values = Vec::with_capacity(grid.total_nodes());
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(Error::mismatch(format!(
                "wave file row {} has {} columns, expected {}",
                ln + 2,
                fields.len(),
                dim + 2
            )));
        }
        let mut nums = Vec::with_capacity(dim + 2);
        for f in &fields {
            nums.push(f.parse::<f64>().map_err(|_| {
                Error::mismatch(format!("wave file row {} is not numeric: {line:?}", ln + 2))
            })?);
        }
        let row = values.len();
        if row >= grid.total_nodes() {
            return Err(Error::mismatch("wave file has more rows than the grid"));
        }
        let ix = row / nc;
        let ic = row % nc;
        let mut expect = vec![grid.x(ix)];
        expect.extend(grid.cross.coordinate(ic));
        for (got, want) in nums[..dim + 1].iter().zip(&expect) {
            if (got - want).abs() > 1e-12 * (1.0 + want.abs()) {
                return Err(Error::mismatch(format!(
                    "wave file row {} sits at {:?}, grid expects {:?}",
                    ln + 2,
                    &nums[..dim + 1],
                    expect
                )));
            }
        }
        values.push(nums[dim + 1]);
    }
    if values.len() != grid.total_nodes() {
        return Err(Error::mismatch(format!(
            "wave file has {} samples, grid needs {}",
            values.len(),
            grid.total_nodes()
        )));
    }
    Ok(Field::from_values(values))
}

/// One sweep row; failed runs keep their speed and an error note, with
/// every numeric column empty in the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub c: f64,
    pub level1: Option<f64>,
    pub gap: Option<f64>,
    pub residual: Option<f64>,
    pub speed_measured: Option<f64>,
    pub error: Option<String>,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let cell = |v: &Option<f64>| v.map(format_float).unwrap_or_default();
    let mut out = String::from("c,level1,gap,residual,speed_measured\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_float(row.c),
            cell(&row.level1),
            cell(&row.gap),
            cell(&row.residual),
            cell(&row.speed_measured),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub shape: String,
    pub lengths: Vec<f64>,
    pub cross_nodes: Vec<usize>,
    pub x_min: f64,
    pub x_max: f64,
    pub axial_nodes: usize,
    pub dx: f64,
}

impl GridSummary {
    pub fn from_config(config: &RunConfig) -> Self {
        let ch = &config.channel;
        GridSummary {
            shape: config.cross.shape.clone(),
            lengths: config.cross.lengths.clone(),
            cross_nodes: config.cross.nodes.clone(),
            x_min: ch.x_min,
            x_max: ch.x_max,
            axial_nodes: ch.axial_nodes,
            dx: (ch.x_max - ch.x_min) / (ch.axial_nodes - 1) as f64,
        }
    }
}

/// Everything needed to reproduce a run: the full configuration, its
/// hash, and the thread count the run was executed with.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub threads: usize,
    pub random_seed: u64,
    pub grid: GridSummary,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(config: &RunConfig, threads: usize) -> Result<Self> {
        Ok(Provenance {
            config_hash: config.hash()?,
            threads,
            random_seed: config.random_seed,
            grid: GridSummary::from_config(config),
            config: config.clone(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeSection {
    pub eigenvalues: Vec<f64>,
    /// Count of eigenvalues below one; decides the connection regime.
    pub below_one: usize,
    /// "one" when only the lowest eigenvalue sits below one, "two" when
    /// exactly the lowest two do, otherwise "none" or "many".
    pub case_label: String,
    pub expected_critical_points: usize,
    pub threshold: f64,
    pub speed: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundSection {
    pub j_value: f64,
    pub residual: f64,
    pub sup_norm: f64,
    pub morse_tag: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossPointRow {
    pub energy: f64,
    pub residual: f64,
    pub morse_tag: String,
    pub sign_changes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SequencePointRow {
    pub k: usize,
    pub level: f64,
    pub residual: f64,
    pub quartic_mass: f64,
    pub axial_kinetic: f64,
    pub axial_sign_changes: usize,
    pub descent_iterations: usize,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SequenceSection {
    /// Deflated levels approximate the min-max values from seed families
    /// only; no genus computation backs them.
    pub heuristic: bool,
    pub complete: bool,
    pub points: Vec<SequencePointRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeSection {
    pub iterates_recorded: usize,
    pub nonpositive_level_iterates: usize,
    pub sublevel_bounds_all_passed: bool,
    pub final_level: f64,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GlueSection {
    pub mu: f64,
    pub match_fraction: f64,
    pub shift: f64,
    pub junction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveSection {
    pub residual: f64,
    pub newton_iterations: usize,
    pub j_left: f64,
    pub j_right: f64,
    pub kinetic_mass: f64,
    pub gap_mismatch: f64,
    pub left_deviation: f64,
    pub right_deviation: f64,
    pub left_slope_sup: f64,
    pub negated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionSection {
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub expected_speed: f64,
    pub speed_measured: Option<f64>,
    pub level_set_lost: bool,
    pub front_records: usize,
    /// Net front displacement over the whole run, from the level-set track.
    pub displacement: Option<f64>,
    /// Sup distance between the final field and the initial one translated
    /// by `displacement`, relative to the initial amplitude.
    pub shape_deviation: Option<f64>,
}

/// One verification check: an observed quantity against its bound.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub bound: f64,
    pub note: String,
}

impl CheckRow {
    pub fn new(name: &str, observed: f64, bound: f64, note: impl Into<String>) -> Self {
        CheckRow {
            name: name.to_string(),
            passed: observed <= bound,
            observed,
            bound,
            note: note.into(),
        }
    }

    pub fn flag(name: &str, passed: bool, note: impl Into<String>) -> Self {
        CheckRow {
            name: name.to_string(),
            passed,
            observed: if passed { 0.0 } else { 1.0 },
            bound: 0.5,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub all_passed: bool,
    pub checks: Vec<CheckRow>,
    pub provenance: Provenance,
}

/// The report document written by every subcommand; sections outside the
/// subcommand's scope stay null.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub regime: Option<RegimeSection>,
    pub ground: Option<GroundSection>,
    pub cross_critical_points: Option<Vec<CrossPointRow>>,
    pub minimize: Option<MinimizeSection>,
    pub sequence: Option<SequenceSection>,
    pub glue: Option<GlueSection>,
    pub wave: Option<WaveSection>,
    pub evolution: Option<EvolutionSection>,
    pub sweep: Option<Vec<SweepRow>>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn new(command: &str, provenance: Provenance) -> Self {
        RunReport {
            command: command.to_string(),
            regime: None,
            ground: None,
            cross_critical_points: None,
            minimize: None,
            sequence: None,
            glue: None,
            wave: None,
            evolution: None,
            sweep: None,
            warnings: Vec::new(),
            provenance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CrossSectionGrid;

    #[test]
    fn floats_round_trip_through_seventeen_digits() {
        for v in [
            0.1,
            1.0 / 3.0,
            -0.0,
            6.626e-34,
            1.7e308,
            5e-324,
            std::f64::consts::PI,
            -0.006_478_711_4,
        ] {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s} -> {back}");
        }
    }

    #[test]
    fn json_floats_carry_seventeen_digits() {
        #[derive(Serialize)]
        struct Doc {
            x: f64,
            missing: Option<f64>,
        }
        let s = to_json(&Doc {
            x: 0.1,
            missing: None,
        })
        .unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("null"), "{s}");
        let again = to_json(&Doc {
            x: 0.1,
            missing: None,
        })
        .unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn wave_csv_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wave.csv");
        let cross = CrossSectionGrid::interval(2.0, 5).unwrap();
        let grid = ChannelGrid::new(-1.0, 1.0, 5, cross).unwrap();
        let n = grid.total_nodes();
        let values: Vec<f64> = (0..n).map(|i| ((i * 2654435761) % 1000) as f64 / 997.0).collect();
        let field = Field::from_values(values.clone());
        write_wave_csv(&path, &grid, &field).unwrap();
        let back = read_wave_csv(&path, &grid).unwrap();
        for (a, b) in back.values().iter().zip(&values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn wave_csv_rejects_wrong_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wave.csv");
        let cross = CrossSectionGrid::interval(2.0, 5).unwrap();
        let grid = ChannelGrid::new(-1.0, 1.0, 5, cross.clone()).unwrap();
        let field = Field::zeros(grid.total_nodes());
        write_wave_csv(&path, &grid, &field).unwrap();
        let other = ChannelGrid::new(-1.0, 1.0, 7, cross).unwrap();
        let err = read_wave_csv(&path, &other).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn sweep_csv_leaves_failed_cells_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let rows = vec![
            SweepRow {
                c: 0.6,
                level1: Some(-0.0065),
                gap: Some(0.01),
                residual: Some(1e-11),
                speed_measured: Some(0.59),
                error: None,
            },
            SweepRow {
                c: 1.5,
                level1: None,
                gap: None,
                residual: None,
                speed_measured: None,
                error: Some("regime: above threshold".to_string()),
            },
        ];
        write_sweep_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "c,level1,gap,residual,speed_measured");
        assert!(lines[2].ends_with(",,,,"), "{:?}", lines[2]);
    }
}
