//! Deterministic sample-dataset generator.
//!
//! Produces HDFS-, OpenSSH- and Spark-style corpora of 2,000 logs plus
//! labeled QA files (247, 188 and 397 pairs respectively) in the exact file
//! formats the loaders consume. The generators model the event structure of
//! the public 2k log samples those datasets are drawn from: block
//! lifecycles with shared identifiers for HDFS, authentication sessions for
//! OpenSSH, task/broadcast events for Spark. Questions follow the
//! reading-comprehension style of the labeled sets, including the hard
//! cases where a question's identifier token does not match the log's
//! surface form (e.g. `10.0.0.1:50010` vs `/10.0.0.1:50010`).
//!
//! Generation is pure: the same kind and seed always produce byte-identical
//! files.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::text;

pub const CORPUS_SIZE: usize = 2000;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Hdfs,
    OpenSsh,
    Spark,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 3] = [DatasetKind::Hdfs, DatasetKind::OpenSsh, DatasetKind::Spark];

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Hdfs => "hdfs",
            DatasetKind::OpenSsh => "openssh",
            DatasetKind::Spark => "spark",
        }
    }

    pub fn qa_count(&self) -> usize {
        match self {
            DatasetKind::Hdfs => 247,
            DatasetKind::OpenSsh => 188,
            DatasetKind::Spark => 397,
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hdfs" => Ok(DatasetKind::Hdfs),
            "openssh" => Ok(DatasetKind::OpenSsh),
            "spark" => Ok(DatasetKind::Spark),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// One QA line as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaRecord {
    pub question: String,
    pub answer: String,
    pub log: String,
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub name: String,
    pub corpus_lines: Vec<String>,
    pub qa: Vec<QaRecord>,
}

impl GeneratedDataset {
    pub fn corpus(&self) -> Result<Corpus> {
        Corpus::from_lines(&self.name, &self.corpus_lines)
    }

    pub fn write_corpus(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for line in &self.corpus_lines {
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn write_qa(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for record in &self.qa {
            let line = serde_json::to_string(record)
                .map_err(|e| Error::InvalidConfig(format!("serialize qa record: {e}")))?;
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Generate one dataset. Deterministic in (kind, seed).
pub fn generate(kind: DatasetKind, seed: u64) -> GeneratedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind.name().len() as u64) << 32 ^ kind_tag(kind));
    let (corpus_lines, qa) = match kind {
        DatasetKind::Hdfs => generate_hdfs(&mut rng),
        DatasetKind::OpenSsh => generate_openssh(&mut rng),
        DatasetKind::Spark => generate_spark(&mut rng),
    };
    debug_assert_eq!(corpus_lines.len(), CORPUS_SIZE);
    debug_assert_eq!(qa.len(), kind.qa_count());
    for record in &qa {
        debug_assert!(
            text::contains_answer(&record.log, &record.answer),
            "generator produced an uncontained answer: {record:?}"
        );
    }
    GeneratedDataset { name: kind.name().to_string(), corpus_lines, qa }
}

fn kind_tag(kind: DatasetKind) -> u64 {
    match kind {
        DatasetKind::Hdfs => 0x48444653,
        DatasetKind::OpenSsh => 0x535348,
        DatasetKind::Spark => 0x535052,
    }
}

// ---------------------------------------------------------------- HDFS ----

struct HdfsBlock {
    id: String,
    size: u64,
    src_ip: String,
    src_port: u16,
    dests: Vec<String>,
    responder: usize,
}

fn generate_hdfs(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<QaRecord>) {
    // a dozen datanodes, as in a small cluster
    let ips: Vec<String> = (0..12)
        .map(|_| format!("10.251.{}.{}", rng.gen_range(0..256), rng.gen_range(1..255)))
        .collect();

    // tagged lines: (template tag, block index, line)
    let mut lines: Vec<(&'static str, usize, String)> = Vec::new();
    let mut blocks: Vec<HdfsBlock> = Vec::new();
    while lines.len() < CORPUS_SIZE + 200 {
        let bi = blocks.len();
        let id = if rng.gen_bool(0.5) {
            format!("blk_{}", rng.gen::<i64>())
        } else {
            format!("blk_{}", rng.gen_range(1_000_000i64..999_999_999))
        };
        let size: u64 =
            if rng.gen_bool(0.2) { 67108864 } else { rng.gen_range(1024..67108864) };
        let src_ip = ips[rng.gen_range(0..ips.len())].clone();
        let src_port: u16 = rng.gen_range(33000..60000);
        let n_dests = rng.gen_range(1..=3usize);
        let dests: Vec<String> = (0..n_dests)
            .map(|_| ips[rng.gen_range(0..ips.len())].clone())
            .collect();
        let responder = rng.gen_range(0..4usize);
        let block = HdfsBlock { id, size, src_ip, src_port, dests, responder };

        if rng.gen_bool(0.55) {
            lines.push((
                "allocate",
                bi,
                format!(
                    "BLOCK* NameSystem.allocateBlock: /user/root/rand/_temporary/_task_{}_0013_m_{:06}_0/part-{}. {}",
                    200811092030u64 + rng.gen_range(0..99999) as u64,
                    rng.gen_range(0..400),
                    rng.gen_range(0..400),
                    block.id
                ),
            ));
        }
        for dest in &block.dests {
            if rng.gen_bool(0.8) {
                lines.push((
                    "receiving",
                    bi,
                    format!(
                        "Receiving block {} src: /{}:{} dest: /{}:50010",
                        block.id, block.src_ip, block.src_port, dest
                    ),
                ));
            }
        }
        if rng.gen_bool(0.8) {
            lines.push((
                "received",
                bi,
                format!(
                    "Received block {} of size {} from /{}",
                    block.id, block.size, block.src_ip
                ),
            ));
        }
        if rng.gen_bool(0.75) {
            lines.push((
                "responder",
                bi,
                format!("PacketResponder {} for block {} terminating", block.responder, block.id),
            ));
        }
        if rng.gen_bool(0.7) {
            let dest = &block.dests[rng.gen_range(0..block.dests.len())];
            lines.push((
                "stored",
                bi,
                format!(
                    "BLOCK* NameSystem.addStoredBlock: blockMap updated: {}:50010 is added to {} size {}",
                    dest, block.id, block.size
                ),
            ));
        }
        if rng.gen_bool(0.15) {
            lines.push(("verified", bi, format!("Verification succeeded for {}", block.id)));
        }
        if rng.gen_bool(0.12) {
            let dest = &block.dests[rng.gen_range(0..block.dests.len())];
            lines.push((
                "invalidset",
                bi,
                format!(
                    "BLOCK* NameSystem.delete: {} is added to invalidSet of {}:50010",
                    block.id, dest
                ),
            ));
        }
        if rng.gen_bool(0.08) {
            let dest = &block.dests[rng.gen_range(0..block.dests.len())];
            lines.push(("ask_delete", bi, format!("BLOCK* ask {}:50010 to delete {}", dest, block.id)));
        }
        if rng.gen_bool(0.1) {
            lines.push((
                "deleting",
                bi,
                format!(
                    "Deleting block {} file /mnt/hadoop/dfs/data/current/subdir{}/{}",
                    block.id,
                    rng.gen_range(0..64),
                    block.id
                ),
            ));
        }
        if rng.gen_bool(0.05) {
            let dest = &block.dests[rng.gen_range(0..block.dests.len())];
            lines.push((
                "transfer",
                bi,
                format!("Starting thread to transfer block {} to {}:50010", block.id, dest),
            ));
        }
        blocks.push(block);
    }

    lines.shuffle(rng);
    lines.truncate(CORPUS_SIZE);
    let corpus_lines: Vec<String> = lines.iter().map(|(_, _, l)| l.clone()).collect();

    // question quotas: ~88% what, ~11% where, 1 other
    let mut qa = Vec::new();
    let mut quotas: Vec<(&'static str, usize)> = vec![
        ("what_size", 50),
        ("what_receiving", 35),
        ("what_responder", 50),
        ("what_status", 33),
        ("what_invalidset", 18),
        ("what_ask_delete", 16),
        ("what_allocate", 15),
        ("where_received", 22),
        ("where_stored", 7),
        ("other_bytes", 1),
    ];
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.shuffle(rng);
    fill_questions(rng, &order, 247, &mut quotas, &mut qa, |rng, li, quotas| {
        let (tag, bi, line) = &lines[li];
        hdfs_question(rng, tag, &blocks[*bi], line, quotas)
    });
    qa.truncate(247);
    (corpus_lines, qa)
}

fn has_quota(quotas: &[(&'static str, usize)], key: &str) -> bool {
    quotas.iter().any(|(name, left)| *name == key && *left > 0)
}

fn take_quota(quotas: &mut [(&'static str, usize)], key: &str) {
    for (name, left) in quotas.iter_mut() {
        if *name == key && *left > 0 {
            *left -= 1;
            return;
        }
    }
}

/// Run one quota-filling pass: build a candidate per line, keep it when the
/// answer is contained, the question is new, and its type still has quota.
fn fill_questions<F>(
    rng: &mut ChaCha8Rng,
    order: &[usize],
    total: usize,
    quotas: &mut Vec<(&'static str, usize)>,
    qa: &mut Vec<QaRecord>,
    mut candidate: F,
) where
    F: FnMut(&mut ChaCha8Rng, usize, &[(&'static str, usize)]) -> Option<(&'static str, QaRecord)>,
{
    for _pass in 0..12 {
        for &li in order {
            if qa.len() >= total {
                return;
            }
            if let Some((key, record)) = candidate(rng, li, quotas) {
                if text::contains_answer(&record.log, &record.answer)
                    && !qa.iter().any(|r| r.question == record.question)
                {
                    take_quota(quotas, key);
                    qa.push(record);
                }
            }
        }
        if qa.len() >= total {
            return;
        }
    }
}

/// Question-side surface noise for long identifiers, imitating how a
/// Wikipedia-trained question generator rewrites tokens it does not know:
/// the character run survives but the exact token form often does not.
fn mangle_block_id(id: &str, rng: &mut ChaCha8Rng, prob: f64) -> String {
    if !rng.gen_bool(prob) {
        return id.to_string();
    }
    match rng.gen_range(0..5) {
        0 | 1 | 2 => id.trim_start_matches("blk_").to_string(),
        3 => id.replacen('_', " ", 1),
        _ => id[..id.len() - 1].to_string(),
    }
}

fn hdfs_question(
    rng: &mut ChaCha8Rng,
    tag: &str,
    block: &HdfsBlock,
    line: &str,
    quotas: &[(&'static str, usize)],
) -> Option<(&'static str, QaRecord)> {
    let id = &block.id;
    let make = |key: &'static str, question: String, answer: String| {
        Some((key, QaRecord { question, answer, log: line.to_string() }))
    };
    match tag {
        "received" if has_quota(quotas, "what_size") => {
            let mid = mangle_block_id(id, rng, 0.65);
            let ip = &block.src_ip;
            let question = match rng.gen_range(0..6) {
                0 | 1 => format!("What size block {mid} was received from {ip}?"),
                2 => format!("What is the size of the block {mid} received from {ip}?"),
                3 => format!("What is the size of block {mid}?"),
                4 => format!("What size is the block {mid} received from {ip}?"),
                _ => format!("What is the size of {mid}?"),
            };
            make("what_size", question, block.size.to_string())
        }
        "receiving" if has_quota(quotas, "what_receiving") => {
            // the questions quote ip:port without the leading slash, so the
            // token does not match the log surface exactly
            let question = match rng.gen_range(0..3) {
                0 => format!(
                    "What is the block that is receiving from {}:{}?",
                    block.src_ip, block.src_port
                ),
                1 => format!(
                    "What block is receiving from {}:{}?",
                    block.src_ip, block.src_port
                ),
                _ => format!("What block is being received from {}:{}?", block.src_ip, block.src_port),
            };
            make("what_receiving", question, id.clone())
        }
        "responder" if has_quota(quotas, "what_responder") => {
            let mid = mangle_block_id(id, rng, 0.5);
            let question = match rng.gen_range(0..10) {
                0..=6 => format!("What terminated block {mid}?"),
                _ => format!("What was terminating for block {mid}?"),
            };
            make("what_responder", question, format!("PacketResponder {}", block.responder))
        }
        "verified" if has_quota(quotas, "what_status") => {
            let mid = mangle_block_id(id, rng, 0.3);
            let question = match rng.gen_range(0..2) {
                0 => format!("What is the status of the verification of {mid}?"),
                _ => format!("What is the verification status of block {mid}?"),
            };
            make("what_status", question, "succeeded".to_string())
        }
        "invalidset" if has_quota(quotas, "what_invalidset") => {
            let mid = mangle_block_id(id, rng, 0.5);
            make("what_invalidset", format!("What is {mid} added to?"), "invalidSet".to_string())
        }
        "ask_delete" if has_quota(quotas, "what_ask_delete") => {
            // recover the ip:port token from the line itself
            let target = line.split_whitespace().nth(2)?.to_string();
            let target = if rng.gen_bool(0.5) {
                target.trim_end_matches(":50010").to_string()
            } else {
                target
            };
            make("what_ask_delete", format!("What block was {target} asked to delete?"), id.clone())
        }
        "allocate" if has_quota(quotas, "what_allocate") => {
            let path = line.split_whitespace().nth(2)?.trim_end_matches('.');
            let anchor = if rng.gen_bool(0.6) {
                path.rsplit('/').next()?.to_string()
            } else {
                path.to_string()
            };
            make("what_allocate", format!("What block was allocated for {anchor}?"), id.clone())
        }
        "received" if has_quota(quotas, "where_received") => {
            let mid = mangle_block_id(id, rng, 0.4);
            let question = match rng.gen_range(0..10) {
                0..=2 => format!(
                    "Where was the block {mid} of size {} received from?",
                    block.size
                ),
                3..=6 => format!("Where was the block {mid} received from?"),
                _ => format!("Where did the block {mid} come from?"),
            };
            make("where_received", question, format!("/{}", block.src_ip))
        }
        "stored" if has_quota(quotas, "where_stored") => {
            let mid = mangle_block_id(id, rng, 0.5);
            let target = line.split_whitespace().nth(4)?.to_string();
            make("where_stored", format!("Where is the block {mid} added in the blockMap?"), target)
        }
        "received" if has_quota(quotas, "other_bytes") => {
            make(
                "other_bytes",
                format!("How many bytes is the size of block {id}?"),
                block.size.to_string(),
            )
        }
        _ => None,
    }
}

// ------------------------------------------------------------- OpenSSH ----

fn generate_openssh(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<QaRecord>) {
    let attacker_ips: Vec<String> = (0..50)
        .map(|_| {
            format!(
                "{}.{}.{}.{}",
                rng.gen_range(5..223),
                rng.gen_range(0..256),
                rng.gen_range(0..256),
                rng.gen_range(1..255)
            )
        })
        .collect();
    let invalid_users = [
        "admin", "test", "oracle", "guest", "user", "ftpuser", "pi", "ubnt", "support", "postgres",
        "nagios", "deploy",
    ];
    let valid_users = ["fztu", "curi", "zxu"];
    let host_stems = [
        "ns.marryaldkfaczcz.com",
        "static.customers.tangodsl.net",
        "ec2-52-80-34-196.cn-north-1.compute.example.com.cn",
        "customer.worldstream.nl",
        "mail.bitel.com.pe",
        "vps.hostingfirm.io",
        "dhcp.dynamic.ttnet.com.tr",
        "node.colo.serverhub.gr",
    ];
    let hosts: Vec<String> = (0..30)
        .map(|i| format!("srv{}.{}", rng.gen_range(10..990), host_stems[i % host_stems.len()]))
        .collect();

    let mut lines: Vec<(&'static str, String)> = Vec::new();
    while lines.len() < CORPUS_SIZE + 200 {
        let ip = &attacker_ips[rng.gen_range(0..attacker_ips.len())];
        let port: u32 = rng.gen_range(1024..65000);
        match rng.gen_range(0..10) {
            0..=3 => {
                // root password brute force
                lines.push((
                    "pam_auth_failure",
                    format!(
                        "pam_unix(sshd:auth): authentication failure; logname= uid=0 euid=0 tty=ssh ruser= rhost={ip}  user=root"
                    ),
                ));
                let attempts = rng.gen_range(1..=3);
                for a in 0..attempts {
                    lines.push((
                        "failed_password",
                        format!("Failed password for root from {ip} port {} ssh2", port + a),
                    ));
                }
                if rng.gen_bool(0.4) {
                    lines.push((
                        "repeated",
                        format!(
                            "message repeated {} times: [ Failed password for root from {ip} port {port} ssh2]",
                            rng.gen_range(2..6)
                        ),
                    ));
                }
                if rng.gen_bool(0.5) {
                    lines.push((
                        "disconnect_byebye",
                        format!("Received disconnect from {ip}: 11: Bye Bye [preauth]"),
                    ));
                } else {
                    lines.push((
                        "connection_closed",
                        format!("Connection closed by {ip} [preauth]"),
                    ));
                }
                if rng.gen_bool(0.3) {
                    lines.push((
                        "too_many",
                        "Disconnecting: Too many authentication failures for root [preauth]".to_string(),
                    ));
                }
                if rng.gen_bool(0.3) {
                    lines.push((
                        "pam_more",
                        format!(
                            "PAM {} more authentication failures; logname= uid=0 euid=0 tty=ssh ruser= rhost={ip}  user=root",
                            rng.gen_range(1..5)
                        ),
                    ));
                }
                if rng.gen_bool(0.25) {
                    lines.push((
                        "max_exceeded",
                        format!(
                            "error: maximum authentication attempts exceeded for root from {ip} port {port} ssh2 [preauth]"
                        ),
                    ));
                }
            }
            4..=5 => {
                let user = invalid_users[rng.gen_range(0..invalid_users.len())];
                lines.push(("invalid_user", format!("Invalid user {user} from {ip}")));
                lines.push((
                    "input_userauth",
                    format!("input_userauth_request: invalid user {user} [preauth]"),
                ));
                if rng.gen_bool(0.7) {
                    lines.push((
                        "failed_password_invalid",
                        format!("Failed password for invalid user {user} from {ip} port {port} ssh2"),
                    ));
                }
                lines.push(("connection_closed", format!("Connection closed by {ip} [preauth]")));
            }
            6 => {
                let host = &hosts[rng.gen_range(0..hosts.len())];
                lines.push((
                    "reverse_mapping",
                    format!(
                        "reverse mapping checking getaddrinfo for {host} [{ip}] failed - POSSIBLE BREAK-IN ATTEMPT!"
                    ),
                ));
            }
            7 => {
                let user = valid_users[rng.gen_range(0..valid_users.len())];
                lines.push((
                    "accepted",
                    format!("Accepted password for {user} from {ip} port {port} ssh2"),
                ));
                lines.push((
                    "session_opened",
                    format!("pam_unix(sshd:session): session opened for user {user} by (uid=0)"),
                ));
                if rng.gen_bool(0.8) {
                    lines.push((
                        "session_closed",
                        format!("pam_unix(sshd:session): session closed for user {user}"),
                    ));
                }
            }
            8 => {
                lines.push((
                    "no_identification",
                    format!("Did not receive identification string from {ip}"),
                ));
            }
            _ => {
                lines.push((
                    "jsch_exception",
                    format!(
                        "error: Received disconnect from {ip}: 3: com.jcraft.jsch.JSchException: Auth fail [preauth]"
                    ),
                ));
            }
        }
    }

    lines.shuffle(rng);
    lines.truncate(CORPUS_SIZE);
    let corpus_lines: Vec<String> = lines.iter().map(|(_, l)| l.clone()).collect();

    let mut quotas: Vec<(&'static str, usize)> = vec![
        ("what_port", 60),
        ("what_invalid_user", 35),
        ("what_failed_user", 30),
        ("what_connection", 18),
        ("what_disconnect", 15),
        ("what_exception", 10),
        ("what_exceeded", 5),
        ("did_reverse", 11),
        ("who_session", 2),
        ("how_many_pam", 2),
    ];
    let mut qa = Vec::new();
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.shuffle(rng);
    fill_questions(rng, &order, 188, &mut quotas, &mut qa, |rng, li, quotas| {
        let (tag, line) = &lines[li];
        openssh_question(rng, tag, line, quotas)
    });
    qa.truncate(188);
    (corpus_lines, qa)
}

fn openssh_question(
    rng: &mut ChaCha8Rng,
    tag: &str,
    line: &str,
    quotas: &[(&'static str, usize)],
) -> Option<(&'static str, QaRecord)> {
    let words: Vec<&str> = line.split_whitespace().collect();
    let make = |key: &'static str, question: String, answer: String| {
        Some((key, QaRecord { question, answer, log: line.to_string() }))
    };
    match tag {
        "failed_password" if has_quota(quotas, "what_port") => {
            // "Failed password for root from <ip> port <port> ssh2"
            let ip = words.get(5)?.to_string();
            let port = words.get(7)?.to_string();
            let question = match rng.gen_range(0..3) {
                0 => format!("What is the port of the failed password for root from {ip}?"),
                1 => format!("What port did the failed password for root from {ip} use?"),
                _ => format!("What is the port of the ssh2 failure from {ip}?"),
            };
            make("what_port", question, port)
        }
        "invalid_user" if has_quota(quotas, "what_invalid_user") => {
            // "Invalid user <name> from <ip>"
            let user = words.get(2)?.to_string();
            let ip = words.get(4)?.to_string();
            let question = match rng.gen_range(0..2) {
                0 => format!("What user was invalid from {ip}?"),
                _ => format!("What invalid user came from {ip}?"),
            };
            make("what_invalid_user", question, user)
        }
        "failed_password_invalid" if has_quota(quotas, "what_failed_user") => {
            // "Failed password for invalid user <name> from <ip> port <port> ssh2"
            let user = words.get(5)?.to_string();
            let ip = words.get(7)?.to_string();
            let port = words.get(9)?.to_string();
            make(
                "what_failed_user",
                format!("What user failed the password from {ip} port {port}?"),
                user,
            )
        }
        "connection_closed" if has_quota(quotas, "what_connection") => {
            let ip = words.get(3)?.to_string();
            make(
                "what_connection",
                format!("What happened to the connection by {ip}?"),
                "closed".to_string(),
            )
        }
        "disconnect_byebye" if has_quota(quotas, "what_disconnect") => {
            let ip = words.get(3)?.trim_end_matches(':').to_string();
            make(
                "what_disconnect",
                format!("What was the disconnect message received from {ip}?"),
                "Bye Bye".to_string(),
            )
        }
        "jsch_exception" if has_quota(quotas, "what_exception") => {
            let ip = words.get(4)?.trim_end_matches(':').to_string();
            make(
                "what_exception",
                format!("What exception was received in the disconnect from {ip}?"),
                "com.jcraft.jsch.JSchException".to_string(),
            )
        }
        "max_exceeded" if has_quota(quotas, "what_exceeded") => {
            let ip = words.get(8)?.to_string();
            make(
                "what_exceeded",
                format!("What was exceeded for root from {ip}?"),
                "maximum authentication attempts".to_string(),
            )
        }
        "reverse_mapping" if has_quota(quotas, "did_reverse") => {
            let host = words.get(5)?.to_string();
            make(
                "did_reverse",
                format!("Did the reverse mapping checking getaddrinfo for {host} fail?"),
                "failed".to_string(),
            )
        }
        "session_opened" if has_quota(quotas, "who_session") => {
            let user = words.get(5)?.to_string();
            let question = match rng.gen_range(0..2) {
                0 => "Who opened a session by (uid=0)?".to_string(),
                _ => "Who was the session opened for by (uid=0)?".to_string(),
            };
            make("who_session", question, user)
        }
        "pam_more" if has_quota(quotas, "how_many_pam") => {
            // "PAM <n> more authentication failures; ... rhost=<ip>  user=root"
            let n = words.get(1)?.to_string();
            let rhost = words.iter().find(|w| w.starts_with("rhost="))?;
            let ip = rhost.trim_start_matches("rhost=").to_string();
            make(
                "how_many_pam",
                format!("How many more authentication failures were there for root from {ip}?"),
                n,
            )
        }
        _ => None,
    }
}

// --------------------------------------------------------------- Spark ----

fn generate_spark(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<QaRecord>) {
    let mut lines: Vec<(&'static str, String)> = Vec::new();
    let mut broadcast_n: u32 = 0;
    let mut tid: u32 = 500;
    while lines.len() < CORPUS_SIZE + 200 {
        match rng.gen_range(0..9) {
            0..=2 => {
                // broadcast read + storage
                broadcast_n += 1;
                let n = broadcast_n;
                if rng.gen_bool(0.8) {
                    lines.push(("started_reading", format!("Started reading broadcast variable {n}")));
                }
                if rng.gen_bool(0.85) {
                    let ms = rng.gen_range(1..400);
                    lines.push((
                        "read_took",
                        format!("Reading broadcast variable {n} took {ms} ms"),
                    ));
                }
                if rng.gen_bool(0.8) {
                    let size = format!("{:.1}", rng.gen_range(1.0..30.0));
                    let free = format!("{:.1}", rng.gen_range(100.0..500.0));
                    lines.push((
                        "stored_values",
                        format!(
                            "Block broadcast_{n} stored as values in memory (estimated size {size} KB, free {free} KB)"
                        ),
                    ));
                }
                if rng.gen_bool(0.6) {
                    let size = format!("{:.1}", rng.gen_range(1.0..10.0));
                    let free = format!("{:.1}", rng.gen_range(100.0..500.0));
                    lines.push((
                        "stored_bytes",
                        format!(
                            "Block broadcast_{n}_piece0 stored as bytes in memory (estimated size {size} KB, free {free} KB)"
                        ),
                    ));
                }
                if rng.gen_bool(0.3) {
                    lines.push((
                        "told_master",
                        format!("Told master about block broadcast_{n}_piece0"),
                    ));
                }
                if rng.gen_bool(0.15) {
                    lines.push((
                        "dropping",
                        format!("Dropping block broadcast_{n} from memory"),
                    ));
                }
            }
            3..=5 => {
                // task lifecycle
                tid += 1;
                let task = rng.gen_range(0..500);
                let stage = rng.gen_range(0..30);
                lines.push(("assigned", format!("Got assigned task {tid}")));
                if rng.gen_bool(0.85) {
                    lines.push((
                        "running",
                        format!("Running task {task}.0 in stage {stage}.0 (TID {tid})"),
                    ));
                }
                if rng.gen_bool(0.8) {
                    let bytes = rng.gen_range(1000..3000);
                    lines.push((
                        "finished",
                        format!(
                            "Finished task {task}.0 in stage {stage}.0 (TID {tid}). {bytes} bytes result sent to driver"
                        ),
                    ));
                }
            }
            6 => {
                let a = rng.gen_range(0..40);
                let b = rng.gen_range(0..40);
                lines.push(("found_block", format!("Found block rdd_{a}_{b} locally")));
            }
            7 => {
                let n = rng.gen_range(1..8);
                let m = rng.gen_range(n..=12);
                lines.push((
                    "non_empty",
                    format!("Getting {n} non-empty blocks out of {m} blocks"),
                ));
                if rng.gen_bool(0.5) {
                    let bytes = rng.gen_range(1000..200000);
                    lines.push(("ensuring", format!("Ensuring free space for {bytes} bytes")));
                }
            }
            _ => {
                let a: u64 = rng.gen_range(0..30000000);
                let b: u64 = rng.gen_range(1000000..8000000);
                lines.push((
                    "input_split",
                    format!("Input split: hdfs://hostname/2kSOSP.log:{a}+{b}"),
                ));
                if rng.gen_bool(0.3) {
                    lines.push(("removing_rdd", format!("Removing RDD {}", rng.gen_range(0..60))));
                }
            }
        }
    }

    lines.shuffle(rng);
    lines.truncate(CORPUS_SIZE);
    let corpus_lines: Vec<String> = lines.iter().map(|(_, l)| l.clone()).collect();

    let mut quotas: Vec<(&'static str, usize)> = vec![
        ("how_many_ms", 113),
        ("how_many_bytes_driver", 75),
        ("how_many_nonempty", 4),
        ("how_many_ensuring", 1),
        ("what_estimated_size", 57),
        ("what_free", 25),
        ("what_variable_took", 15),
        ("what_found", 10),
        ("is_stored", 77),
        ("how_large", 11),
        ("how_long", 8),
        ("other_input_split", 1),
    ];
    let mut qa = Vec::new();
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.shuffle(rng);
    fill_questions(rng, &order, 397, &mut quotas, &mut qa, |rng, li, quotas| {
        let (tag, line) = &lines[li];
        spark_question(rng, tag, line, quotas)
    });
    qa.truncate(397);
    (corpus_lines, qa)
}

fn spark_question(
    rng: &mut ChaCha8Rng,
    tag: &str,
    line: &str,
    quotas: &[(&'static str, usize)],
) -> Option<(&'static str, QaRecord)> {
    let words: Vec<&str> = line.split_whitespace().collect();
    let make = |key: &'static str, question: String, answer: String| {
        Some((key, QaRecord { question, answer, log: line.to_string() }))
    };
    match tag {
        "read_took" if has_quota(quotas, "how_many_ms") => {
            // "Reading broadcast variable <n> took <ms> ms"
            let n = words.get(3)?.to_string();
            let ms = words.get(5)?.to_string();
            let question = match rng.gen_range(0..2) {
                0 => format!("How many ms did it take to read the broadcast variable {n}?"),
                _ => format!("How many ms did reading broadcast variable {n} take?"),
            };
            make("how_many_ms", question, ms)
        }
        "finished" if has_quota(quotas, "how_many_bytes_driver") => {
            // "Finished task <t>.0 in stage <s>.0 (TID <tid>). <b> bytes result sent to driver"
            let task = words.get(2)?.to_string();
            let stage = words.get(5)?.to_string();
            let bytes = words.get(8)?.to_string();
            make(
                "how_many_bytes_driver",
                format!("How many bytes result were sent to the driver by task {task} in stage {stage}?"),
                bytes,
            )
        }
        "non_empty" if has_quota(quotas, "how_many_nonempty") => {
            let n = words.get(1)?.to_string();
            let m = words.get(6)?.to_string();
            make(
                "how_many_nonempty",
                format!("How many non-empty blocks were got out of {m} blocks?"),
                n,
            )
        }
        "ensuring" if has_quota(quotas, "how_many_ensuring") => {
            let bytes = words.get(4)?.to_string();
            make(
                "how_many_ensuring",
                "How many bytes was free space ensured for?".to_string(),
                bytes,
            )
        }
        "stored_values" if has_quota(quotas, "what_estimated_size") => {
            // "Block broadcast_<n> stored as values in memory (estimated size <s> KB, free <f> KB)"
            let block = words.get(1)?.to_string();
            let size = words.get(9)?.to_string();
            let question = match rng.gen_range(0..2) {
                0 => format!("What is the estimated size of the block {block}?"),
                _ => format!("What is the estimated size of {block} stored in memory?"),
            };
            make("what_estimated_size", question, size)
        }
        "stored_bytes" if has_quota(quotas, "what_free") => {
            let block = words.get(1)?.to_string();
            let free = words.get(12)?.to_string();
            make("what_free", format!("What is the free memory after storing {block}?"), free)
        }
        "read_took" if has_quota(quotas, "what_variable_took") => {
            let n = words.get(3)?.to_string();
            let ms = words.get(5)?.to_string();
            make(
                "what_variable_took",
                format!("What broadcast variable took {ms} ms to read?"),
                n,
            )
        }
        "found_block" if has_quota(quotas, "what_found") => {
            let block = words.get(2)?.to_string();
            make("what_found", format!("What block named {block} was found?"), block.clone())
        }
        "stored_values" if has_quota(quotas, "is_stored") => {
            let block = words.get(1)?.to_string();
            make(
                "is_stored",
                format!("Is the block {block} stored as values or bytes in memory?"),
                "values".to_string(),
            )
        }
        "stored_bytes" if has_quota(quotas, "is_stored") => {
            let block = words.get(1)?.to_string();
            make(
                "is_stored",
                format!("Is the block {block} stored as values or bytes in memory?"),
                "bytes".to_string(),
            )
        }
        "stored_values" if has_quota(quotas, "how_large") => {
            let block = words.get(1)?.to_string();
            let size = words.get(9)?.to_string();
            make(
                "how_large",
                format!("How large is the estimated size of the block {block}?"),
                size,
            )
        }
        "read_took" if has_quota(quotas, "how_long") => {
            let n = words.get(3)?.to_string();
            let ms = words.get(5)?.to_string();
            make(
                "how_long",
                format!("How long did reading broadcast variable {n} take in ms?"),
                ms,
            )
        }
        "input_split" if has_quota(quotas, "other_input_split") => {
            let split = words.get(2)?.to_string();
            make(
                "other_input_split",
                "Where was the input split read from?".to_string(),
                split,
            )
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        for kind in DatasetKind::ALL {
            let a = generate(kind, DEFAULT_SEED);
            let b = generate(kind, DEFAULT_SEED);
            assert_eq!(a.corpus_lines, b.corpus_lines);
            assert_eq!(a.qa.len(), b.qa.len());
            for (x, y) in a.qa.iter().zip(&b.qa) {
                assert_eq!(x.question, y.question);
                assert_eq!(x.answer, y.answer);
                assert_eq!(x.log, y.log);
            }
        }
    }

    #[test]
    fn scale_matches_published_statistics() {
        for kind in DatasetKind::ALL {
            let d = generate(kind, DEFAULT_SEED);
            assert_eq!(d.corpus_lines.len(), CORPUS_SIZE, "{}", kind.name());
            assert_eq!(d.qa.len(), kind.qa_count(), "{}", kind.name());
        }
    }

    #[test]
    fn every_answer_is_contained_and_every_log_resolvable() {
        for kind in DatasetKind::ALL {
            let d = generate(kind, DEFAULT_SEED);
            let corpus = d.corpus().unwrap();
            for record in &d.qa {
                assert!(
                    text::contains_answer(&record.log, &record.answer),
                    "uncontained {record:?}"
                );
                assert!(
                    corpus.find_exact(&record.log).is_some(),
                    "gold log missing from corpus: {:?}",
                    record.log
                );
            }
        }
    }

    #[test]
    fn round_trips_through_the_loaders() {
        let dir = tempfile::tempdir().unwrap();
        let d = generate(DatasetKind::Hdfs, DEFAULT_SEED);
        let corpus_path = dir.path().join("hdfs.log");
        let qa_path = dir.path().join("hdfs_qa.jsonl");
        d.write_corpus(&corpus_path).unwrap();
        d.write_qa(&qa_path).unwrap();
        let corpus = crate::corpus::load_log_corpus(&corpus_path, "hdfs").unwrap();
        assert_eq!(corpus.len(), CORPUS_SIZE);
        let (pairs, report) = crate::corpus::load_qa_pairs(&qa_path, &corpus).unwrap();
        assert_eq!(pairs.len(), 247, "rejections: {}", report.to_text());
        assert!(report.rejected.is_empty());
        assert!(pairs.iter().all(|p| p.gold_log_id.is_some()));
    }
}

