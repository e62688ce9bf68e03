//! TNTP network and trip tables, flow CSV files.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use log::warn;
use wardrop_qp::Scalar;

use crate::error::{parse_err, Error, Result};
use crate::netmodel::FlowState;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec<T> {
    /// 1-based node id.
    pub from_node: usize,
    pub to_node: usize,
    pub capacity: T,
    pub free_flow_time: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec<T> {
    pub node_count: usize,
    pub zone_count: usize,
    /// Read from the header when present. Not enforced during assignment.
    pub first_thru_node: Option<usize>,
    /// File order defines the physical link index.
    pub links: Vec<LinkSpec<T>>,
}

impl<T: Scalar> NetworkSpec<T> {
    pub fn link_count(&self) -> usize {
        self.links.len()
    }
}

/// OD demands keyed by 1-based (origin, destination) zone ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTable<T> {
    pub zone_count: usize,
    entries: BTreeMap<(usize, usize), T>,
}

impl<T: Scalar> DemandTable<T> {
    pub fn new(zone_count: usize) -> Self {
        Self {
            zone_count,
            entries: BTreeMap::new(),
        }
    }

    /// Adds `value` to the (origin, destination) entry.
    pub fn add(&mut self, origin: usize, destination: usize, value: T) -> Result<()> {
        if origin == 0
            || destination == 0
            || origin > self.zone_count
            || destination > self.zone_count
        {
            return Err(Error::Data(format!(
                "zone pair ({origin}, {destination}) outside 1..={}",
                self.zone_count
            )));
        }
        if !(value >= T::zero()) || !value.is_finite() {
            return Err(Error::Data(format!(
                "demand {value} for ({origin}, {destination})"
            )));
        }
        if origin == destination {
            if value > T::zero() {
                warn!("dropping intrazonal demand {value} at zone {origin}");
            }
            return Ok(());
        }
        *self
            .entries
            .entry((origin, destination))
            .or_insert(T::zero()) += value;
        Ok(())
    }

    pub fn get(&self, origin: usize, destination: usize) -> T {
        self.entries
            .get(&(origin, destination))
            .copied()
            .unwrap_or(T::zero())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending (origin, destination) order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.entries.iter().map(|(&(o, d), &v)| (o, d, v))
    }

    pub fn total(&self) -> T {
        self.entries.values().copied().sum()
    }

    pub fn max_demand(&self) -> T {
        self.entries.values().copied().fold(T::zero(), T::max)
    }
}

fn parse_num<T: Scalar>(tok: &str, line: usize, what: &str) -> Result<T> {
    T::from_str_radix(tok, 10)
        .ok()
        .filter(|v: &T| !v.is_nan())
        .ok_or_else(|| parse_err(line, format!("{what}: `{tok}` is not a number")))
}

fn parse_index(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.parse().map_err(|_| {
        parse_err(
            line,
            format!("{what}: `{tok}` is not a non-negative integer"),
        )
    })
}

/// Splits `<KEY> value` metadata lines.
fn metadata(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix('<')?;
    let close = rest.find('>')?;
    Some((rest[..close].trim(), rest[close + 1..].trim()))
}

/// Strips a trailing `~` comment.
fn strip_comment(line: &str) -> &str {
    match line.find('~') {
        Some(k) => &line[..k],
        None => line,
    }
}

pub fn parse_network<T: Scalar, R: BufRead>(reader: R) -> Result<NetworkSpec<T>> {
    let mut nodes = None;
    let mut zones = None;
    let mut declared_links = None;
    let mut first_thru = None;
    let mut in_body = false;
    let mut links = Vec::new();
    let mut last_line = 0;
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        last_line = lineno;
        let line = line?;
        let trimmed = line.trim();
        if !in_body {
            if trimmed.is_empty() || trimmed.starts_with('~') {
                continue;
            }
            let (key, value) = metadata(trimmed)
                .ok_or_else(|| parse_err(lineno, "expected a `<KEY> value` header line"))?;
            match key.to_ascii_uppercase().as_str() {
                "NUMBER OF NODES" => nodes = Some(parse_index(value, lineno, "node count")?),
                "NUMBER OF ZONES" => zones = Some(parse_index(value, lineno, "zone count")?),
                "NUMBER OF LINKS" => {
                    declared_links = Some(parse_index(value, lineno, "link count")?)
                }
                "FIRST THRU NODE" => {
                    first_thru = Some(parse_index(value, lineno, "first thru node")?)
                }
                "END OF METADATA" => {
                    if nodes.is_none() || zones.is_none() || declared_links.is_none() {
                        return Err(parse_err(
                            lineno,
                            "metadata must declare NUMBER OF NODES, NUMBER OF ZONES and NUMBER OF LINKS",
                        ));
                    }
                    in_body = true;
                }
                _ => {}
            }
            continue;
        }
        let body = strip_comment(trimmed);
        let fields: Vec<&str> = body.split_whitespace().filter(|t| *t != ";").collect();
        if fields.is_empty() {
            continue;
        }
        let fields: Vec<&str> = fields.iter().map(|t| t.trim_end_matches(';')).collect();
        if fields.len() < 5 {
            return Err(parse_err(
                lineno,
                format!("expected at least 5 fields, found {}", fields.len()),
            ));
        }
        let node_count = nodes.unwrap_or(0);
        let from_node = parse_index(fields[0], lineno, "init node")?;
        let to_node = parse_index(fields[1], lineno, "term node")?;
        for (id, name) in [(from_node, "init"), (to_node, "term")] {
            if id == 0 || id > node_count {
                return Err(parse_err(
                    lineno,
                    format!("{name} node {id} out of range 1..={node_count}"),
                ));
            }
        }
        if from_node == to_node {
            return Err(parse_err(lineno, format!("self-loop at node {from_node}")));
        }
        let capacity: T = parse_num(fields[2], lineno, "capacity")?;
        let free_flow_time: T = parse_num(fields[4], lineno, "free flow time")?;
        if !(capacity > T::zero()) || !capacity.is_finite() {
            return Err(parse_err(
                lineno,
                format!("capacity must be positive, got {capacity}"),
            ));
        }
        if !(free_flow_time >= T::zero()) || !free_flow_time.is_finite() {
            return Err(parse_err(
                lineno,
                format!("free flow time must be >= 0, got {free_flow_time}"),
            ));
        }
        links.push(LinkSpec {
            from_node,
            to_node,
            capacity,
            free_flow_time,
        });
    }
    if !in_body {
        return Err(parse_err(last_line, "missing <END OF METADATA>"));
    }
    let declared = declared_links.unwrap_or(0);
    if links.len() != declared {
        return Err(parse_err(
            last_line,
            format!("declared {declared} links but parsed {}", links.len()),
        ));
    }
    let node_count = nodes.unwrap_or(0);
    let zone_count = zones.unwrap_or(0);
    if zone_count > node_count {
        return Err(parse_err(
            last_line,
            format!("{zone_count} zones but only {node_count} nodes"),
        ));
    }
    Ok(NetworkSpec {
        node_count,
        zone_count,
        first_thru_node: first_thru,
        links,
    })
}

pub fn parse_network_str<T: Scalar>(text: &str) -> Result<NetworkSpec<T>> {
    parse_network(text.as_bytes())
}

/// Writes a TNTP network file that [`parse_network`] reads back to the same value.
/// Length, b, power, speed, toll and type columns are filled with placeholders.
pub fn write_network<T: Scalar, W: Write>(net: &NetworkSpec<T>, mut w: W) -> Result<()> {
    writeln!(w, "<NUMBER OF ZONES> {}", net.zone_count)?;
    writeln!(w, "<NUMBER OF NODES> {}", net.node_count)?;
    if let Some(f) = net.first_thru_node {
        writeln!(w, "<FIRST THRU NODE> {f}")?;
    }
    writeln!(w, "<NUMBER OF LINKS> {}", net.links.len())?;
    writeln!(w, "<END OF METADATA>")?;
    writeln!(w)?;
    writeln!(
        w,
        "~\tinit\tterm\tcapacity\tlength\tfftt\tb\tpower\tspeed\ttoll\ttype\t;"
    )?;
    for l in &net.links {
        writeln!(
            w,
            "\t{}\t{}\t{}\t0\t{}\t0.15\t4\t0\t0\t1\t;",
            l.from_node, l.to_node, l.capacity, l.free_flow_time
        )?;
    }
    Ok(())
}

pub fn parse_trips<T: Scalar, R: BufRead>(reader: R) -> Result<DemandTable<T>> {
    let mut zones = None;
    let mut declared_total: Option<f64> = None;
    let mut table: Option<DemandTable<T>> = None;
    let mut origin: Option<usize> = None;
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let trimmed = strip_comment(line.trim()).trim();
        if trimmed.is_empty() {
            continue;
        }
        if table.is_none() {
            let (key, value) = metadata(trimmed)
                .ok_or_else(|| parse_err(lineno, "expected a `<KEY> value` header line"))?;
            match key.to_ascii_uppercase().as_str() {
                "NUMBER OF ZONES" => zones = Some(parse_index(value, lineno, "zone count")?),
                "TOTAL OD FLOW" => declared_total = Some(parse_num(value, lineno, "total flow")?),
                "END OF METADATA" => {
                    let z = zones.ok_or_else(|| {
                        parse_err(lineno, "metadata must declare NUMBER OF ZONES")
                    })?;
                    table = Some(DemandTable::new(z));
                }
                _ => {}
            }
            continue;
        }
        let tab = table.as_mut().expect("body starts after metadata");
        if let Some(rest) = trimmed
            .strip_prefix("Origin")
            .or_else(|| trimmed.strip_prefix("origin"))
        {
            let o = parse_index(rest.trim(), lineno, "origin")?;
            if o == 0 || o > tab.zone_count {
                return Err(parse_err(
                    lineno,
                    format!("origin {o} exceeds zone count {}", tab.zone_count),
                ));
            }
            origin = Some(o);
            continue;
        }
        let o =
            origin.ok_or_else(|| parse_err(lineno, "demand entries before any `Origin` line"))?;
        for chunk in trimmed.split(';') {
            let chunk = chunk.trim();
            if chunk.is_empty() {
                continue;
            }
            let (d, v) = chunk
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("malformed pair `{chunk}`")))?;
            let d = parse_index(d.trim(), lineno, "destination")?;
            let v: T = parse_num(v.trim(), lineno, "demand")?;
            if d == 0 || d > tab.zone_count {
                return Err(parse_err(
                    lineno,
                    format!("destination {d} exceeds zone count {}", tab.zone_count),
                ));
            }
            if v < T::zero() {
                return Err(parse_err(
                    lineno,
                    format!("negative demand {v} for ({o}, {d})"),
                ));
            }
            tab.add(o, d, v)
                .map_err(|e| parse_err(lineno, e.to_string()))?;
        }
    }
    let table = match table {
        Some(t) => t,
        None => return Err(parse_err(0, "missing <END OF METADATA>")),
    };
    if let Some(decl) = declared_total {
        let got = table.total().as_f64();
        if (got - decl).abs() > 1e-6 * decl.abs().max(1.0) {
            warn!("trip table sums to {got} but declares a total of {decl}");
        }
    }
    Ok(table)
}

pub fn parse_trips_str<T: Scalar>(text: &str) -> Result<DemandTable<T>> {
    parse_trips(text.as_bytes())
}

/// Writes `link_index,class_index,flow` rows (0-based indices), link-major.
pub fn write_flows_csv<T: Scalar, W: Write>(flows: &FlowState<T>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["link_index", "class_index", "flow"])?;
    for i in 0..flows.link_count() {
        for u in 0..flows.class_count() {
            out.write_record([i.to_string(), u.to_string(), flows.get(i, u).to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a flows file written by [`write_flows_csv`]; every (link, class)
/// cell of the expected shape must appear exactly once.
pub fn read_flows_csv<T: Scalar, R: Read>(
    r: R,
    links: usize,
    classes: usize,
) -> Result<FlowState<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3
        || &headers[0] != "link_index"
        || &headers[1] != "class_index"
        || &headers[2] != "flow"
    {
        return Err(parse_err(
            1,
            "expected header `link_index,class_index,flow`",
        ));
    }
    let mut flows = FlowState::zeros(links, classes);
    let mut seen = vec![false; links * classes];
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let lineno = k + 2;
        if rec.len() < 3 {
            return Err(parse_err(lineno, "expected 3 columns"));
        }
        let i = parse_index(&rec[0], lineno, "link_index")?;
        let u = parse_index(&rec[1], lineno, "class_index")?;
        let v: T = parse_num(&rec[2], lineno, "flow")?;
        if i >= links || u >= classes {
            return Err(Error::Dimension(format!(
                "line {lineno}: cell ({i}, {u}) outside {links} links x {classes} classes"
            )));
        }
        if seen[i * classes + u] {
            return Err(parse_err(
                lineno,
                format!("duplicate row for link {i}, class {u}"),
            ));
        }
        if !(v >= T::zero()) || !v.is_finite() {
            return Err(parse_err(
                lineno,
                format!("flow must be finite and >= 0, got {v}"),
            ));
        }
        seen[i * classes + u] = true;
        flows.set(i, u, v);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Dimension(format!(
            "no row for link {}, class {}",
            missing / classes,
            missing % classes
        )));
    }
    Ok(flows)
}
