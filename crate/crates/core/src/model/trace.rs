use std::sync::Arc;

struct Link<T> {
    item: T,
    prev: Option<Arc<Link<T>>>,
}

/// Append-only persistent list. Cloning shares the existing prefix, so
/// particles that share ancestry share history.
pub struct Trace<T> {
    head: Option<Arc<Link<T>>>,
    len: usize,
}

impl<T> Trace<T> {
    pub fn new() -> Self {
        Self { head: None, len: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, item: T) {
        let prev = self.head.take();
        self.head = Some(Arc::new(Link { item, prev }));
        self.len += 1;
    }

    pub fn last(&self) -> Option<&T> {
        self.head.as_deref().map(|l| &l.item)
    }

    /// Newest first.
    pub fn iter_rev(&self) -> impl Iterator<Item = &T> {
        let mut cur = self.head.as_deref();
        std::iter::from_fn(move || {
            let link = cur?;
            cur = link.prev.as_deref();
            Some(&link.item)
        })
    }

    /// Oldest first.
    pub fn to_vec(&self) -> Vec<&T> {
        let mut v: Vec<&T> = self.iter_rev().collect();
        v.reverse();
        v
    }
}

impl<T> Default for Trace<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Clone for Trace<T> {
    fn clone(&self) -> Self {
        Self {
            head: self.head.clone(),
            len: self.len,
        }
    }
}

impl<T> Drop for Trace<T> {
    // unlink iteratively so long histories do not recurse on drop
    fn drop(&mut self) {
        let mut cur = self.head.take();
        while let Some(link) = cur {
            match Arc::try_unwrap(link) {
                Ok(mut l) => cur = l.prev.take(),
                Err(_) => break,
            }
        }
    }
}
