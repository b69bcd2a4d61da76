use std::net::Ipv4Addr;

use ipnet::Ipv4Net;

/// Binary prefix trie over IPv4 bits mapping each prefix to one owner.
///
/// Nodes live in an arena; removal clears the value and prunes empty
/// leaves on the way back up.
#[derive(Debug, Clone)]
pub struct AllowedIps<T> {
    nodes: Vec<Node<T>>,
    free: Vec<usize>,
    len: usize,
}

#[derive(Debug, Clone)]
struct Node<T> {
    child: [Option<usize>; 2],
    value: Option<T>,
}

impl<T> Node<T> {
    fn empty() -> Self {
        Node {
            child: [None, None],
            value: None,
        }
    }
}

fn bit(addr: u32, depth: u8) -> usize {
    ((addr >> (31 - depth)) & 1) as usize
}

impl<T> Default for AllowedIps<T> {
    fn default() -> Self {
        AllowedIps {
            nodes: vec![Node::empty()],
            free: Vec::new(),
            len: 0,
        }
    }
}

impl<T> AllowedIps<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn alloc(&mut self) -> usize {
        match self.free.pop() {
            Some(i) => i,
            None => {
                self.nodes.push(Node::empty());
                self.nodes.len() - 1
            }
        }
    }

    /// Inserts `net` (host bits are ignored) and returns the previous owner
    /// of that exact prefix, if any.
    pub fn insert(&mut self, net: Ipv4Net, value: T) -> Option<T> {
        let net = net.trunc();
        let addr = u32::from(net.network());
        let mut cur = 0;
        for depth in 0..net.prefix_len() {
            let b = bit(addr, depth);
            cur = match self.nodes[cur].child[b] {
                Some(n) => n,
                None => {
                    let n = self.alloc();
                    self.nodes[cur].child[b] = Some(n);
                    n
                }
            };
        }
        let prev = self.nodes[cur].value.replace(value);
        if prev.is_none() {
            self.len += 1;
        }
        prev
    }

    /// Owner of exactly `net`.
    pub fn get(&self, net: Ipv4Net) -> Option<&T> {
        let net = net.trunc();
        let addr = u32::from(net.network());
        let mut cur = 0;
        for depth in 0..net.prefix_len() {
            cur = self.nodes[cur].child[bit(addr, depth)]?;
        }
        self.nodes[cur].value.as_ref()
    }

    pub fn remove(&mut self, net: Ipv4Net) -> Option<T> {
        let net = net.trunc();
        let addr = u32::from(net.network());
        let mut path = Vec::with_capacity(33);
        let mut cur = 0;
        for depth in 0..net.prefix_len() {
            path.push(cur);
            cur = self.nodes[cur].child[bit(addr, depth)]?;
        }
        let out = self.nodes[cur].value.take()?;
        self.len -= 1;
        // Prune now-empty leaves back towards the root.
        let mut depth = net.prefix_len();
        while let Some(parent) = path.pop() {
            let n = &self.nodes[cur];
            if n.value.is_some() || n.child.iter().any(Option::is_some) {
                break;
            }
            depth -= 1;
            self.nodes[parent].child[bit(addr, depth)] = None;
            self.free.push(cur);
            cur = parent;
        }
        Some(out)
    }

    /// Longest prefix containing `ip`, with its owner.
    pub fn longest_match(&self, ip: Ipv4Addr) -> Option<(Ipv4Net, &T)> {
        let addr = u32::from(ip);
        let mut cur = 0;
        let mut best = self.nodes[0].value.as_ref().map(|v| (0u8, v));
        for depth in 0..32u8 {
            match self.nodes[cur].child[bit(addr, depth)] {
                Some(n) => cur = n,
                None => break,
            }
            if let Some(v) = &self.nodes[cur].value {
                best = Some((depth + 1, v));
            }
        }
        best.map(|(len, v)| (Ipv4Net::new(ip, len).expect("len <= 32").trunc(), v))
    }

    /// All prefixes with owners, in address-then-length order.
    pub fn iter(&self) -> Vec<(Ipv4Net, &T)> {
        let mut out = Vec::with_capacity(self.len);
        let mut stack = vec![(0usize, 0u32, 0u8)];
        while let Some((i, addr, depth)) = stack.pop() {
            let n = &self.nodes[i];
            if let Some(v) = &n.value {
                out.push((Ipv4Net::new(addr.into(), depth).expect("depth <= 32"), v));
            }
            for b in [1usize, 0] {
                if let Some(c) = n.child[b] {
                    let a = if b == 1 {
                        addr | (1 << (31 - depth))
                    } else {
                        addr
                    };
                    stack.push((c, a, depth + 1));
                }
            }
        }
        out
    }

    /// Removes every prefix whose owner fails `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&Ipv4Net, &T) -> bool) {
        let drop: Vec<Ipv4Net> = self
            .iter()
            .into_iter()
            .filter(|(n, v)| !keep(n, v))
            .map(|(n, _)| n)
            .collect();
        for n in drop {
            self.remove(n);
        }
    }
}
