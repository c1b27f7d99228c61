//! Per-tick trajectory records and their CSV form.
//!
//! CSV layout: header `trial_id,tick,x_mm,y_mm,mode,region`, one row per
//! tick, coordinates with three decimals, mode in `STILL|CRAWL|EXPLORE` and
//! region in `C|R1..Rn|W`. Tracked trajectories without behavioural labels
//! use `UNKNOWN` in the mode and region columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::automaton::Mode;
use crate::error::CsvError;
use crate::geometry::{Point, RegionId};

pub const CSV_HEADER: &str = "trial_id,tick,x_mm,y_mm,mode,region";
pub const UNKNOWN: &str = "UNKNOWN";

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tick: u64,
    pub pos: Point,
    pub mode: Option<Mode>,
    pub region: Option<RegionId>,
    /// Mechanoreceptor reading at `pos`. Not part of the CSV.
    pub contact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub trial_id: u64,
    /// Room count of the environment that produced the trajectory.
    pub rooms: u32,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.samples.last().map(|s| s.tick)
    }

    pub fn write_csv_rows(&self, out: &mut String) {
        for s in &self.samples {
            let mode = s.mode.map_or(UNKNOWN, Mode::label);
            let region = s.region.map_or_else(|| UNKNOWN.to_string(), |r| r.to_string());
            let _ = writeln!(
                out,
                "{},{},{:.3},{:.3},{},{}",
                self.trial_id, s.tick, s.pos.x, s.pos.y, mode, region
            );
        }
    }

    /// Full CSV text, header included.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.samples.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        self.write_csv_rows(&mut out);
        out
    }
}

/// Parse trajectory CSV text. Rows are grouped by `trial_id` (ascending);
/// row order within a trial is kept. `origin` names the source in errors.
pub fn parse_csv<R: Read>(reader: R, origin: &str, rooms: u32) -> Result<Vec<Trajectory>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let malformed = |line: usize, message: String| CsvError::Malformed {
        path: origin.to_string(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(malformed(1, format!("expected header `{CSV_HEADER}`")));
    }

    let mut trials: BTreeMap<u64, Vec<Sample>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize, name: &str| -> Result<f64, CsvError> {
            let v: f64 = field(i)
                .parse()
                .map_err(|_| malformed(line, format!("bad {name} {:?}", field(i))))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(malformed(line, format!("non-finite {name}")))
            }
        };
        let trial_id: u64 = field(0)
            .parse()
            .map_err(|_| malformed(line, format!("bad trial_id {:?}", field(0))))?;
        let tick: u64 = field(1)
            .parse()
            .map_err(|_| malformed(line, format!("bad tick {:?}", field(1))))?;
        let x = num(2, "x_mm")?;
        let y = num(3, "y_mm")?;
        let mode = match field(4) {
            UNKNOWN => None,
            s => Some(s.parse::<Mode>().map_err(|e| malformed(line, e))?),
        };
        let region = match field(5) {
            UNKNOWN => None,
            s => Some(
                s.parse::<RegionId>()
                    .map_err(|e| malformed(line, e.to_string()))?,
            ),
        };
        trials.entry(trial_id).or_default().push(Sample {
            tick,
            pos: Point::new(x, y),
            mode,
            region,
            contact: false,
        });
    }

    Ok(trials
        .into_iter()
        .map(|(trial_id, samples)| Trajectory {
            trial_id,
            rooms,
            samples,
        })
        .collect())
}

pub fn read_csv(path: &Path, rooms: u32) -> Result<Vec<Trajectory>, CsvError> {
    let file = std::fs::File::open(path)?;
    parse_csv(std::io::BufReader::new(file), &path.display().to_string(), rooms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(tick: u64, x: f64, mode: Mode, region: RegionId) -> Sample {
        Sample {
            tick,
            pos: Point::new(x, 22.0),
            mode: Some(mode),
            region: Some(region),
            contact: false,
        }
    }

    #[test]
    fn csv_format() {
        let t = Trajectory {
            trial_id: 3,
            rooms: 8,
            samples: vec![
                sample(0, 130.0, Mode::Crawl, RegionId::Corridor),
                sample(1, 7.12345, Mode::Explore, RegionId::Room(1)),
            ],
        };
        assert_eq!(
            t.to_csv(),
            "trial_id,tick,x_mm,y_mm,mode,region\n\
             3,0,130.000,22.000,CRAWL,C\n\
             3,1,7.123,22.000,EXPLORE,R1\n"
        );
        let back = parse_csv(t.to_csv().as_bytes(), "mem", 8).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].samples[1].region, Some(RegionId::Room(1)));
        assert_eq!(back[0].samples[1].pos.x, 7.123);
    }

    #[test]
    fn unknown_labels() {
        let text = "trial_id,tick,x_mm,y_mm,mode,region\n0,0,1.000,2.000,UNKNOWN,UNKNOWN\n";
        let t = parse_csv(text.as_bytes(), "mem", 8).unwrap();
        assert_eq!(t[0].samples[0].mode, None);
        assert_eq!(t[0].to_csv(), text);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let text = "trial_id,tick,x_mm,y_mm,mode,region\n0,0,1,2,CRAWL,C\n0,1,oops,2,CRAWL,C\n";
        match parse_csv(text.as_bytes(), "t.csv", 8) {
            Err(CsvError::Malformed { path, line, .. }) => {
                assert_eq!(path, "t.csv");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad_header = "a,b\n1,2\n";
        assert!(matches!(
            parse_csv(bad_header.as_bytes(), "t.csv", 8),
            Err(CsvError::Malformed { line: 1, .. })
        ));
        let bad_mode = "trial_id,tick,x_mm,y_mm,mode,region\n0,0,1,2,SWIM,C\n";
        assert!(parse_csv(bad_mode.as_bytes(), "t.csv", 8).is_err());
    }

    #[test]
    fn groups_trials() {
        let text = "trial_id,tick,x_mm,y_mm,mode,region\n1,0,1,2,CRAWL,C\n0,0,1,2,STILL,C\n1,1,1,2,CRAWL,C\n";
        let t = parse_csv(text.as_bytes(), "mem", 8).unwrap();
        assert_eq!(t.iter().map(|t| t.trial_id).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(t[1].len(), 2);
    }
}
