//! Synthetic flow tables in the column layout of the builtin schemas, plus
//! small Gaussian fixtures. The generators mimic the coarse traffic profile of
//! each attack family (protocol, flags, byte counts, connection rates) with
//! enough overlap that classifiers do not score perfectly.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::dataio::{ColumnKind, Dataset, Schema};
use crate::{seeded_rng, Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    NslKdd,
    UnswNb15,
    Ciciot2023,
}

impl SynthKind {
    pub fn schema_id(self) -> &'static str {
        match self {
            SynthKind::NslKdd => "nsl-kdd",
            SynthKind::UnswNb15 => "unsw-nb15",
            SynthKind::Ciciot2023 => "ciciot2023",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nsl-kdd" => Some(SynthKind::NslKdd),
            "unsw-nb15" => Some(SynthKind::UnswNb15),
            "ciciot2023" => Some(SynthKind::Ciciot2023),
            _ => None,
        }
    }

    fn header(self) -> bool {
        !matches!(self, SynthKind::NslKdd)
    }

    /// Raw labels with relative frequencies.
    fn mix(self) -> &'static [(&'static str, f64)] {
        match self {
            SynthKind::NslKdd => NSL_MIX,
            SynthKind::UnswNb15 => UNSW_MIX,
            SynthKind::Ciciot2023 => CIC_MIX,
        }
    }
}

const NSL_MIX: &[(&str, f64)] = &[
    ("normal", 67343.0),
    ("neptune", 41214.0),
    ("smurf", 2646.0),
    ("back", 956.0),
    ("teardrop", 892.0),
    ("pod", 201.0),
    ("land", 18.0),
    ("satan", 3633.0),
    ("ipsweep", 3599.0),
    ("portsweep", 2931.0),
    ("nmap", 1493.0),
    ("warezclient", 890.0),
    ("guess_passwd", 53.0),
    ("ftp_write", 8.0),
    ("imap", 11.0),
    ("buffer_overflow", 30.0),
    ("rootkit", 10.0),
    ("loadmodule", 9.0),
];

const UNSW_MIX: &[(&str, f64)] = &[
    ("Normal", 56000.0),
    ("Generic", 40000.0),
    ("Exploits", 33393.0),
    ("Fuzzers", 18184.0),
    ("DoS", 12264.0),
    ("Reconnaissance", 10491.0),
    ("Analysis", 2000.0),
    ("Backdoor", 1746.0),
    ("Shellcode", 1133.0),
    ("Worms", 130.0),
];

const CIC_MIX: &[(&str, f64)] = &[
    ("BENIGNTRAFFIC", 1098195.0),
    ("DDOS-ICMP_FLOOD", 7200504.0),
    ("DDOS-UDP_FLOOD", 5412287.0),
    ("DDOS-TCP_FLOOD", 4497667.0),
    ("DDOS-PSHACK_FLOOD", 4094755.0),
    ("DDOS-SYN_FLOOD", 4059190.0),
    ("DDOS-RSTFINFLOOD", 4045285.0),
    ("DDOS-SYNONYMOUSIP_FLOOD", 3598138.0),
    ("DOS-UDP_FLOOD", 3318595.0),
    ("DOS-TCP_FLOOD", 2671445.0),
    ("DOS-SYN_FLOOD", 2028834.0),
    ("MIRAI-GREETH_FLOOD", 991866.0),
    ("MIRAI-UDPPLAIN", 890576.0),
    ("MIRAI-GREIP_FLOOD", 751682.0),
    ("MITM-ARPSPOOFING", 307593.0),
    ("DNS_SPOOFING", 178911.0),
    ("RECON-HOSTDISCOVERY", 134378.0),
    ("RECON-OSSCAN", 98259.0),
    ("RECON-PORTSCAN", 82284.0),
    ("DICTIONARYBRUTEFORCE", 13064.0),
    ("BROWSERHIJACKING", 5859.0),
    ("COMMANDINJECTION", 5409.0),
    ("SQLINJECTION", 5245.0),
    ("XSS", 3846.0),
];

struct Draw<'a> {
    rng: &'a mut Rng,
}

impl Draw<'_> {
    fn u(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..=hi)
    }

    fn int(&mut self, lo: i64, hi: i64) -> f64 {
        self.rng.random_range(lo..=hi) as f64
    }

    fn p(&mut self, prob: f64) -> bool {
        self.rng.random::<f64>() < prob
    }

    fn ln(&mut self, median: f64, sigma: f64) -> f64 {
        LogNormal::new(median.ln(), sigma).expect("valid lognormal").sample(self.rng)
    }

    fn rate(&mut self, center: f64, spread: f64) -> f64 {
        let v = Normal::new(center, spread).expect("valid normal").sample(self.rng);
        (v.clamp(0.0, 1.0) * 100.0).round() / 100.0
    }

    fn pick<'s>(&mut self, options: &[&'s str]) -> &'s str {
        options[self.rng.random_range(0..options.len())]
    }
}

type Row = HashMap<&'static str, String>;

fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.6}")
    }
}

fn set(row: &mut Row, pairs: &[(&'static str, f64)]) {
    for &(k, v) in pairs {
        row.insert(k, num(v));
    }
}

fn nsl_row(label: &str, d: &mut Draw) -> Row {
    let mut r = Row::new();
    let cat = |r: &mut Row, p: &str, s: &str, f: &str| {
        r.insert("protocol_type", p.to_string());
        r.insert("service", s.to_string());
        r.insert("flag", f.to_string());
    };
    let host = |d: &mut Draw, r: &mut Row, same: f64, diff: f64, serr: f64, rerr: f64| {
        let dhc = d.int(1, 255);
        set(
            r,
            &[
                ("dst_host_count", dhc),
                ("dst_host_srv_count", d.int(1, dhc as i64)),
                ("dst_host_same_srv_rate", d.rate(same, 0.1)),
                ("dst_host_diff_srv_rate", d.rate(diff, 0.05)),
                ("dst_host_same_src_port_rate", d.rate(0.05, 0.1)),
                ("dst_host_srv_diff_host_rate", d.rate(0.02, 0.03)),
                ("dst_host_serror_rate", d.rate(serr, 0.05)),
                ("dst_host_srv_serror_rate", d.rate(serr, 0.05)),
                ("dst_host_rerror_rate", d.rate(rerr, 0.05)),
                ("dst_host_srv_rerror_rate", d.rate(rerr, 0.05)),
            ],
        );
    };
    match label {
        "normal" => {
            let svc = d.pick(&["http", "http", "http", "smtp", "ftp_data", "domain_u", "private", "ftp", "other", "eco_i"]);
            let proto = match svc {
                "domain_u" | "private" => "udp",
                "eco_i" => "icmp",
                _ => "tcp",
            };
            // a few failed or rejected connections among benign traffic
            let flag = if proto != "tcp" {
                "SF"
            } else if d.p(0.04) {
                d.pick(&["REJ", "S0", "RSTO"])
            } else {
                "SF"
            };
            cat(&mut r, proto, svc, flag);
            let busy = d.p(0.05);
            let count = if busy { d.int(40, 200) } else { d.int(1, 25) };
            let serr = if flag == "S0" { d.u(0.2, 1.0) } else { 0.0 };
            let rerr = if flag == "REJ" { d.u(0.2, 1.0) } else { 0.0 };
            set(
                &mut r,
                &[
                    ("duration", if d.p(0.85) { 0.0 } else { d.ln(20.0, 2.0).round() }),
                    ("src_bytes", if flag == "SF" { d.ln(260.0, 0.9).round() } else { 0.0 }),
                    ("dst_bytes", if flag == "SF" && proto == "tcp" { d.ln(1800.0, 1.3).round() } else { 0.0 }),
                    ("hot", if d.p(0.05) { d.int(1, 4) } else { 0.0 }),
                    ("logged_in", if proto == "tcp" && flag == "SF" { 1.0 } else { 0.0 }),
                    ("count", count),
                    ("srv_count", (count + d.int(0, 15)).min(511.0)),
                    ("serror_rate", (serr * 100.0).round() / 100.0),
                    ("srv_serror_rate", (serr * 100.0).round() / 100.0),
                    ("rerror_rate", (rerr * 100.0).round() / 100.0),
                    ("srv_rerror_rate", (rerr * 100.0).round() / 100.0),
                    ("same_srv_rate", d.rate(0.95, 0.1)),
                    ("diff_srv_rate", d.rate(0.03, 0.05)),
                    ("srv_diff_host_rate", d.rate(0.1, 0.15)),
                ],
            );
            host(d, &mut r, 0.8, 0.03, serr * 0.3, rerr * 0.3);
        }
        "neptune" => {
            let flag = if d.p(0.88) { "S0" } else { "REJ" };
            let svc = d.pick(&["private", "private", "http", "telnet", "ftp_data", "other", "finger", "smtp", "domain"]);
            cat(&mut r, "tcp", svc, flag);
            let count = d.int(60, 511);
            let (serr, rerr) = if flag == "S0" { (d.rate(0.97, 0.05), 0.0) } else { (0.0, d.rate(0.97, 0.05)) };
            set(
                &mut r,
                &[
                    ("count", count),
                    ("srv_count", d.int(1, 30)),
                    ("serror_rate", serr),
                    ("srv_serror_rate", serr),
                    ("rerror_rate", rerr),
                    ("srv_rerror_rate", rerr),
                    ("same_srv_rate", d.rate(0.06, 0.05)),
                    ("diff_srv_rate", d.rate(0.07, 0.03)),
                ],
            );
            host(d, &mut r, 0.05, 0.07, serr, rerr);
            set(&mut r, &[("dst_host_count", 255.0), ("dst_host_srv_count", d.int(1, 25))]);
        }
        "smurf" | "pod" => {
            cat(&mut r, "icmp", "ecr_i", "SF");
            let count = if label == "smurf" { d.int(200, 511) } else { d.int(1, 20) };
            let bytes = if label == "smurf" { *[520.0, 1032.0].get(d.int(0, 1) as usize).unwrap() } else { 1480.0 };
            set(
                &mut r,
                &[
                    ("src_bytes", bytes),
                    ("wrong_fragment", if label == "pod" { 1.0 } else { 0.0 }),
                    ("count", count),
                    ("srv_count", count),
                    ("same_srv_rate", 1.0),
                ],
            );
            host(d, &mut r, 1.0, 0.0, 0.0, 0.0);
            set(&mut r, &[("dst_host_same_src_port_rate", d.rate(0.9, 0.1))]);
        }
        "back" => {
            cat(&mut r, "tcp", "http", if d.p(0.8) { "SF" } else { "RSTR" });
            set(
                &mut r,
                &[
                    ("duration", if d.p(0.8) { 0.0 } else { d.int(1, 10) }),
                    ("src_bytes", d.ln(54540.0, 0.05).round()),
                    ("dst_bytes", d.ln(8314.0, 0.3).round()),
                    ("hot", 2.0),
                    ("num_compromised", 1.0),
                    ("logged_in", 1.0),
                    ("count", d.int(1, 30)),
                    ("srv_count", d.int(1, 30)),
                    ("same_srv_rate", 1.0),
                ],
            );
            host(d, &mut r, 0.9, 0.01, 0.0, 0.05);
        }
        "teardrop" => {
            cat(&mut r, "udp", "private", "SF");
            set(&mut r, &[("src_bytes", 28.0), ("wrong_fragment", 3.0), ("count", d.int(1, 100)), ("srv_count", d.int(1, 100)), ("same_srv_rate", 1.0)]);
            host(d, &mut r, 0.7, 0.05, 0.0, 0.0);
        }
        "land" => {
            cat(&mut r, "tcp", d.pick(&["finger", "telnet", "http"]), "S0");
            set(&mut r, &[("land", 1.0), ("count", 1.0), ("srv_count", 1.0), ("serror_rate", 1.0), ("srv_serror_rate", 1.0), ("same_srv_rate", 1.0)]);
            host(d, &mut r, 0.2, 0.2, 0.6, 0.0);
        }
        "satan" | "portsweep" | "nmap" => {
            let (proto, flag) = match label {
                "satan" => ("tcp", d.pick(&["REJ", "REJ", "S0", "SF", "RSTO"])),
                "portsweep" => ("tcp", d.pick(&["RSTR", "REJ", "RSTOS0", "SF"])),
                _ => (d.pick(&["tcp", "udp", "icmp"]), d.pick(&["SF", "S0", "REJ"])),
            };
            let svc = if proto == "icmp" { "eco_i" } else { d.pick(&["private", "other", "ftp_data", "telnet", "finger", "http", "smtp", "domain"]) };
            cat(&mut r, proto, svc, flag);
            let rerr = if flag.starts_with('R') { d.rate(0.85, 0.2) } else { d.rate(0.1, 0.1) };
            set(
                &mut r,
                &[
                    ("duration", if label == "portsweep" && d.p(0.2) { d.ln(2000.0, 1.0).round() } else { 0.0 }),
                    ("src_bytes", if flag == "SF" { d.ln(20.0, 1.0).round() } else { 0.0 }),
                    ("count", d.int(1, 150)),
                    ("srv_count", d.int(1, 10)),
                    ("rerror_rate", rerr),
                    ("srv_rerror_rate", rerr),
                    ("same_srv_rate", d.rate(0.2, 0.2)),
                    ("diff_srv_rate", d.rate(0.6, 0.3)),
                    ("srv_diff_host_rate", d.rate(0.3, 0.3)),
                ],
            );
            host(d, &mut r, 0.1, 0.6, 0.05, rerr);
        }
        "ipsweep" => {
            cat(&mut r, "icmp", d.pick(&["eco_i", "ecr_i"]), "SF");
            set(&mut r, &[("src_bytes", *[8.0, 18.0].get(d.int(0, 1) as usize).unwrap()), ("count", d.int(1, 10)), ("srv_count", d.int(1, 60)), ("same_srv_rate", 1.0), ("srv_diff_host_rate", d.rate(0.9, 0.1))]);
            host(d, &mut r, 0.9, 0.05, 0.0, 0.0);
            set(&mut r, &[("dst_host_srv_diff_host_rate", d.rate(0.6, 0.3)), ("dst_host_same_src_port_rate", d.rate(0.9, 0.1))]);
        }
        _ => {
            // R2L and U2R: interactive sessions with content indicators
            let (svc, flag) = match label {
                "guess_passwd" => ("telnet", d.pick(&["RSTO", "SF"])),
                "warezclient" | "ftp_write" => (d.pick(&["ftp_data", "ftp"]), "SF"),
                "imap" => ("imap4", d.pick(&["SH", "S3", "SF"])),
                _ => (d.pick(&["telnet", "ftp_data", "ftp"]), "SF"),
            };
            cat(&mut r, "tcp", svc, flag);
            let u2r = matches!(label, "buffer_overflow" | "rootkit" | "loadmodule");
            set(
                &mut r,
                &[
                    ("duration", d.ln(if u2r { 150.0 } else { 30.0 }, 1.5).round()),
                    ("src_bytes", d.ln(if label == "warezclient" { 300.0 } else { 1500.0 }, 1.2).round()),
                    ("dst_bytes", d.ln(3000.0, 1.5).round()),
                    ("hot", if label == "warezclient" { d.int(10, 30) } else { d.int(0, 4) }),
                    ("num_failed_logins", if label == "guess_passwd" { 1.0 } else { 0.0 }),
                    ("logged_in", if label == "guess_passwd" { 0.0 } else { 1.0 }),
                    ("is_guest_login", if label == "warezclient" { 1.0 } else { 0.0 }),
                    ("root_shell", if u2r && d.p(0.7) { 1.0 } else { 0.0 }),
                    ("num_file_creations", if u2r { d.int(0, 3) } else { 0.0 }),
                    ("num_root", if u2r { d.int(0, 5) } else { 0.0 }),
                    ("count", d.int(1, 5)),
                    ("srv_count", d.int(1, 5)),
                    ("same_srv_rate", 1.0),
                ],
            );
            host(d, &mut r, 0.5, 0.05, 0.0, 0.0);
        }
    }
    r
}

fn unsw_row(label: &str, d: &mut Draw) -> Row {
    let mut r = Row::new();
    let (proto, service, state, sttl, dttl, spkts, sbytes_med, dbytes_med, dur_med) = match label {
        "Normal" => {
            let svc = d.pick(&["-", "-", "http", "ftp", "dns", "smtp", "ftp-data", "ssh"]);
            let proto = if svc == "dns" || d.p(0.15) { "udp" } else { "tcp" };
            let state = if proto == "udp" { "CON" } else { d.pick(&["FIN", "FIN", "CON"]) };
            (proto, svc, state, *[31.0, 62.0].get(d.int(0, 1) as usize).unwrap(), *[29.0, 252.0].get(d.int(0, 1) as usize).unwrap(), d.ln(12.0, 1.0), 900.0, 6000.0, 0.5)
        }
        "Generic" => ("udp", "dns", "INT", 254.0, 0.0, 2.0, 114.0, 1.0, 0.000_01),
        "Exploits" | "DoS" => {
            let svc = d.pick(&["-", "http", "http", "ftp", "smtp", "pop3"]);
            let st = if d.p(0.7) { "FIN" } else { "INT" };
            let ttl = if d.p(0.2) { 62.0 } else { 254.0 };
            let med = if label == "DoS" { 1200.0 } else { 1800.0 };
            ("tcp", svc, st, ttl, if st == "FIN" { 252.0 } else { 0.0 }, d.ln(18.0, 1.0), med, 2500.0, 0.8)
        }
        "Fuzzers" => {
            let p = if d.p(0.8) { "tcp" } else { "udp" };
            (p, "-", d.pick(&["INT", "FIN", "FIN"]), 254.0, if d.p(0.5) { 252.0 } else { 0.0 }, d.ln(6.0, 0.7), 600.0, 300.0, 0.6)
        }
        "Reconnaissance" => (d.pick(&["tcp", "udp", "tcp"]), d.pick(&["-", "-", "http", "dns"]), d.pick(&["INT", "FIN"]), 254.0, 0.0, d.int(2, 10), 220.0, 50.0, 0.1),
        "Analysis" | "Backdoor" => (d.pick(&["tcp", "udp"]), d.pick(&["-", "http"]), "INT", 254.0, 0.0, d.int(2, 14), 500.0, 40.0, 0.2),
        "Shellcode" => ("tcp", "-", "INT", 254.0, 0.0, d.int(2, 8), 800.0, 1.0, 0.05),
        _ => ("tcp", "http", "FIN", 254.0, 252.0, d.ln(10.0, 0.5), 1500.0, 1800.0, 0.3),
    };
    let spkts = spkts.round().max(1.0);
    let dpkts = if dbytes_med > 1.0 { (spkts * d.u(0.3, 1.5)).round() } else { 0.0 };
    let sbytes = (d.ln(sbytes_med, 0.6) * spkts / 10.0).round().max(spkts * 40.0);
    let dbytes = if dpkts > 0.0 { d.ln(dbytes_med, 0.9).round() } else { 0.0 };
    let dur = d.ln(dur_med, 1.2);
    let tcp = proto == "tcp";
    r.insert("proto", proto.to_string());
    r.insert("service", service.to_string());
    r.insert("state", state.to_string());
    r.insert("attack_cat", label.to_string());
    set(
        &mut r,
        &[
            ("dur", (dur * 1e6).round() / 1e6),
            ("spkts", spkts),
            ("dpkts", dpkts),
            ("sbytes", sbytes),
            ("dbytes", dbytes),
            ("rate", ((spkts + dpkts - 1.0).max(0.0) / dur.max(1e-6)).min(1e6)),
            ("sttl", sttl),
            ("dttl", dttl),
            ("sload", (sbytes * 8.0 / dur.max(1e-6)).min(5e9)),
            ("dload", (dbytes * 8.0 / dur.max(1e-6)).min(5e9)),
            ("sloss", if tcp { (spkts * d.u(0.0, 0.05)).round() } else { 0.0 }),
            ("dloss", if tcp { (dpkts * d.u(0.0, 0.05)).round() } else { 0.0 }),
            ("sinpkt", dur * 1000.0 / spkts),
            ("dinpkt", if dpkts > 0.0 { dur * 1000.0 / dpkts } else { 0.0 }),
            ("sjit", d.ln(30.0, 2.0)),
            ("djit", if dpkts > 0.0 { d.ln(10.0, 2.0) } else { 0.0 }),
            ("swin", if tcp { 255.0 } else { 0.0 }),
            ("stcpb", if tcp { d.int(0, 4_294_967_295) } else { 0.0 }),
            ("dtcpb", if tcp && dpkts > 0.0 { d.int(0, 4_294_967_295) } else { 0.0 }),
            ("dwin", if tcp && dpkts > 0.0 { 255.0 } else { 0.0 }),
            ("tcprtt", if tcp { d.ln(0.05, 1.0) } else { 0.0 }),
            ("synack", if tcp { d.ln(0.02, 1.0) } else { 0.0 }),
            ("ackdat", if tcp { d.ln(0.02, 1.0) } else { 0.0 }),
            ("smean", (sbytes / spkts).round()),
            ("dmean", if dpkts > 0.0 { (dbytes / dpkts).round() } else { 0.0 }),
            ("trans_depth", if service == "http" { d.int(0, 2) } else { 0.0 }),
            ("response_body_len", if service == "http" && dpkts > 0.0 { d.ln(2000.0, 1.5).round() } else { 0.0 }),
            ("ct_srv_src", if label == "Generic" { d.int(10, 60) } else { d.int(1, 15) }),
            ("ct_state_ttl", match (sttl as i64, label) { (254, _) => d.int(1, 2), (_, "Normal") => 0.0, _ => d.int(0, 1) }),
            ("ct_dst_ltm", if label == "Generic" { d.int(5, 40) } else { d.int(1, 10) }),
            ("ct_src_dport_ltm", if label == "Generic" { d.int(5, 40) } else { d.int(1, 8) }),
            ("ct_dst_sport_ltm", if label == "Generic" { d.int(5, 30) } else { d.int(1, 4) }),
            ("ct_dst_src_ltm", if label == "Generic" { d.int(10, 60) } else { d.int(1, 12) }),
            ("is_ftp_login", if service == "ftp" && d.p(0.5) { 1.0 } else { 0.0 }),
            ("ct_ftp_cmd", if service == "ftp" && d.p(0.5) { 1.0 } else { 0.0 }),
            ("ct_flw_http_mthd", if service == "http" { d.int(0, 2) } else { 0.0 }),
            ("ct_src_ltm", d.int(1, 12)),
            ("ct_srv_dst", if label == "Generic" { d.int(10, 60) } else { d.int(1, 15) }),
            ("is_sm_ips_ports", if label == "Normal" && d.p(0.01) { 1.0 } else { 0.0 }),
            ("label", if label == "Normal" { 0.0 } else { 1.0 }),
        ],
    );
    r
}

fn cic_row(label: &str, d: &mut Draw, ts: f64) -> Row {
    let mut r = Row::new();
    let family = label.split(['-', '_']).next().unwrap_or(label);
    let (proto, syn, ack, rst, psh, fin, rate_med, size_med, iat_med) = match label {
        "BENIGNTRAFFIC" => (if d.p(0.8) { 6.0 } else { 17.0 }, 0.05, 0.6, 0.01, 0.3, 0.05, 20.0, 300.0, 1.5e8),
        l if l.contains("ICMP") => (1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 8000.0, 70.0, 8.3e7),
        l if l.contains("UDP") || l == "MIRAI-UDPPLAIN" => (17.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5000.0, 560.0, 8.3e7),
        l if l.contains("SYN") => (6.0, 1.0, 0.0, 0.0, 0.0, 0.0, 3000.0, 54.0, 8.3e7),
        l if l.contains("PSHACK") => (6.0, 0.0, 1.0, 0.0, 1.0, 0.0, 3000.0, 54.0, 8.3e7),
        l if l.contains("RSTFIN") => (6.0, 0.0, 0.0, 1.0, 0.0, 1.0, 3000.0, 54.0, 8.3e7),
        l if l.contains("TCP") => (6.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2500.0, 60.0, 8.3e7),
        l if l.starts_with("MIRAI") => (47.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1500.0, 590.0, 8.3e7),
        l if l.starts_with("RECON") => (6.0, 0.6, 0.2, 0.5, 0.0, 0.0, 200.0, 70.0, 1.0e8),
        "MITM-ARPSPOOFING" | "DNS_SPOOFING" => (if label.starts_with("DNS") { 17.0 } else { 0.0 }, 0.05, 0.3, 0.05, 0.1, 0.02, 100.0, 120.0, 1.2e8),
        _ => (6.0, 0.1, 0.7, 0.05, 0.5, 0.05, 40.0, 500.0, 1.4e8),
    };
    let rate = d.ln(rate_med, 0.7);
    let size = d.ln(size_med, 0.3);
    let number = d.int(1, 13);
    let std = if label == "BENIGNTRAFFIC" { d.ln(150.0, 0.8) } else { d.ln(5.0, 1.2) };
    let web = matches!(family, "BROWSERHIJACKING" | "COMMANDINJECTION" | "SQLINJECTION" | "XSS" | "DICTIONARYBRUTEFORCE" | "BENIGNTRAFFIC");
    let flag = |d: &mut Draw, p: f64| if d.p(p) { 1.0 } else { 0.0 };
    set(
        &mut r,
        &[
            ("ts", ts),
            ("flow_duration", d.ln(if label == "BENIGNTRAFFIC" { 20.0 } else { 2.0 }, 1.5)),
            ("header_length", d.ln(if web { 5000.0 } else { 500.0 }, 1.5).round()),
            ("protocol_type", proto),
            ("duration", (d.ln(64.0, 0.1)).round()),
            ("rate", rate),
            ("srate", rate),
            ("drate", if label == "BENIGNTRAFFIC" { d.ln(0.5, 1.0) } else { 0.0 }),
            ("fin_flag_number", flag(d, fin)),
            ("syn_flag_number", flag(d, syn)),
            ("rst_flag_number", flag(d, rst)),
            ("psh_flag_number", flag(d, psh)),
            ("ack_flag_number", flag(d, ack)),
            ("ece_flag_number", 0.0),
            ("cwr_flag_number", 0.0),
            ("ack_count", if ack > 0.5 { d.u(0.0, 1.5) } else { d.u(0.0, 0.2) }),
            ("syn_count", if syn > 0.5 { d.u(0.8, 2.5) } else { d.u(0.0, 0.3) }),
            ("fin_count", if fin > 0.5 { d.u(0.5, 2.0) } else { d.u(0.0, 0.1) }),
            ("urg_count", d.u(0.0, 0.1)),
            ("rst_count", if rst > 0.3 { d.ln(50.0, 1.0) } else { d.u(0.0, 5.0) }),
            ("http", flag(d, if web && proto == 6.0 { 0.5 } else { 0.0 })),
            ("https", flag(d, if label == "BENIGNTRAFFIC" { 0.4 } else { 0.02 })),
            ("dns", flag(d, if proto == 17.0 && label.contains("DNS") { 0.9 } else { 0.01 })),
            ("telnet", 0.0),
            ("smtp", 0.0),
            ("ssh", flag(d, 0.01)),
            ("irc", 0.0),
            ("tcp", if proto == 6.0 { 1.0 } else { 0.0 }),
            ("udp", if proto == 17.0 { 1.0 } else { 0.0 }),
            ("dhcp", 0.0),
            ("arp", if label == "MITM-ARPSPOOFING" { 1.0 } else { 0.0 }),
            ("icmp", if proto == 1.0 { 1.0 } else { 0.0 }),
            ("ipv", if label == "MITM-ARPSPOOFING" { 0.0 } else { 1.0 }),
            ("llc", if label == "MITM-ARPSPOOFING" { 0.0 } else { 1.0 }),
            ("tot_sum", size * number),
            ("min", size - std.min(size * 0.5)),
            ("max", size + std),
            ("avg", size),
            ("std", std),
            ("tot_size", size),
            ("iat", d.ln(iat_med, 0.05)),
            ("number", number),
            ("magnitude", (2.0 * size).sqrt()),
            ("radius", std * 0.7),
            ("covariance", std * std * 0.5),
            ("variance", if std > 10.0 { 1.0 } else { d.u(0.0, 0.5) }),
            ("weight", number * d.int(1, 12)),
        ],
    );
    r.insert("label", label.to_string());
    r
}

fn pick_label(mix: &[(&'static str, f64)], total: f64, rng: &mut Rng) -> &'static str {
    let mut u = rng.random::<f64>() * total;
    for &(l, w) in mix {
        if u < w {
            return l;
        }
        u -= w;
    }
    mix.last().expect("non-empty mix").0
}

/// Writes `rows` synthetic records in the builtin schema's column order.
/// `labels`, when given, restricts and reweights the raw-label mix.
pub fn write_records<W: Write>(kind: SynthKind, rows: usize, seed: u64, labels: Option<&[&str]>, out: W) -> Result<()> {
    let schema = Schema::builtin(kind.schema_id())?;
    let mix: Vec<(&'static str, f64)> = kind
        .mix()
        .iter()
        .filter(|(l, _)| labels.is_none_or(|ls| ls.contains(l)))
        .copied()
        .collect();
    if mix.is_empty() {
        return Err(Error::pre(format!("no synthetic labels match {labels:?}")));
    }
    let total: f64 = mix.iter().map(|m| m.1).sum();
    let mut rng = seeded_rng(seed, 0x5717);
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
    if kind.header() {
        w.write_record(&names)?;
    }
    let mut ts = 1.6e9;
    for _ in 0..rows {
        let label = pick_label(&mix, total, &mut rng);
        let mut d = Draw { rng: &mut rng };
        let row = match kind {
            SynthKind::NslKdd => nsl_row(label, &mut d),
            SynthKind::UnswNb15 => unsw_row(label, &mut d),
            SynthKind::Ciciot2023 => {
                ts += d.u(0.0, 0.01);
                cic_row(label, &mut d, (ts * 1e3).round() / 1e3)
            }
        };
        let record: Vec<&str> = schema
            .columns()
            .iter()
            .map(|c| match row.get(c.name.as_str()) {
                Some(v) => v.as_str(),
                None if c.kind == ColumnKind::Label => label,
                None => "0",
            })
            .collect();
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<synthetic output>", e))?;
    Ok(())
}

pub fn write_csv(kind: SynthKind, rows: usize, seed: u64, labels: Option<&[&str]>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(kind, rows, seed, labels, std::io::BufWriter::new(f))
}

pub fn generate_csv(kind: SynthKind, rows: usize, seed: u64, labels: Option<&[&str]>) -> Result<String> {
    let mut buf = Vec::new();
    write_records(kind, rows, seed, labels, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Isotropic Gaussian clusters; returns points and their cluster ids.
pub fn gaussian_blobs(centers: &[Vec<f64>], per_cluster: usize, std: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let dim = centers.first().map_or(0, Vec::len);
    let mut rng = seeded_rng(seed, 0xB10B);
    let noise = Normal::new(0.0, std).expect("valid std");
    let n = centers.len() * per_cluster;
    let mut x = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for i in 0..per_cluster {
            let r = c * per_cluster + i;
            for j in 0..dim {
                x[[r, j]] = center[j] + noise.sample(&mut rng);
            }
            labels.push(c);
        }
    }
    (x, labels)
}

/// Two Gaussian classes named "Attack" and "Normal", `separation` apart
/// along the diagonal, as a dataset with `dim` numeric columns.
pub fn two_class_dataset(per_class: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    let shift = separation / (dim as f64).sqrt() / 2.0;
    let centers = vec![vec![shift; dim], vec![-shift; dim]];
    let (x, labels) = gaussian_blobs(&centers, per_class, 1.0, seed);
    let names = (0..dim).map(|j| format!("x{j}")).collect();
    Dataset::from_parts("synthetic", names, x, labels, vec!["Attack".into(), "Normal".into()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::parse_reader;

    #[test]
    fn generated_tables_parse_against_their_schema() {
        for kind in [SynthKind::NslKdd, SynthKind::UnswNb15, SynthKind::Ciciot2023] {
            let text = generate_csv(kind, 300, 1, None).unwrap();
            let schema = Schema::builtin(kind.schema_id()).unwrap();
            let (ds, report) = parse_reader(text.as_bytes(), "synthetic", &schema, &Default::default()).unwrap();
            assert_eq!(ds.n_rows(), 300, "{kind:?}");
            assert!(report.malformed.is_empty(), "{kind:?}: {:?}", report.malformed.first());
            assert_eq!(report.header, kind.header());
        }
    }

    #[test]
    fn deterministic_per_seed_and_label_filter() {
        let a = generate_csv(SynthKind::NslKdd, 50, 3, Some(&["normal", "neptune"])).unwrap();
        let b = generate_csv(SynthKind::NslKdd, 50, 3, Some(&["normal", "neptune"])).unwrap();
        assert_eq!(a, b);
        assert!(a.lines().all(|l| l.ends_with(",normal") || l.ends_with(",neptune")));
        assert!(generate_csv(SynthKind::NslKdd, 5, 3, Some(&["nope"])).is_err());
    }
}
