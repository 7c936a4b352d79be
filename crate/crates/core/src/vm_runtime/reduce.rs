use rayon::prelude::*;

use super::visibility::VisibilityBuffer;
use super::VmError;

/// Encodes a non-negative depth so that nearer means larger and 0 is never
/// produced for finite input.
pub fn encode_depth(d: f32) -> u32 {
    u32::MAX - d.max(0.0).to_bits()
}

pub fn decode_depth(e: u32) -> f32 {
    f32::from_bits(u32::MAX - e)
}

/// Per-page nearest encoded depth (0 = not required), plus whether the page
/// was seen directly rather than only through a link.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RequiredList {
    /// Indexed by page ID; entry 0 is unused.
    pub depth: Vec<u32>,
    pub direct: Vec<bool>,
}

impl RequiredList {
    pub fn new(page_count: u32) -> RequiredList {
        let n = page_count as usize + 1;
        RequiredList { depth: vec![0; n], direct: vec![false; n] }
    }

    pub fn page_count(&self) -> u32 {
        self.depth.len() as u32 - 1
    }

    pub fn is_required(&self, page: u32) -> bool {
        self.depth[page as usize] > 0
    }

    /// Required page IDs in ascending order.
    pub fn pages(&self) -> impl Iterator<Item = u32> + '_ {
        (1..self.depth.len() as u32).filter(|&p| self.depth[p as usize] > 0)
    }

    pub fn count(&self) -> usize {
        self.pages().count()
    }

    fn merge(mut self, other: &RequiredList) -> RequiredList {
        for (a, b) in self.depth.iter_mut().zip(&other.depth) {
            *a = (*a).max(*b);
        }
        for (a, b) in self.direct.iter_mut().zip(&other.direct) {
            *a |= *b;
        }
        self
    }

    fn visit(&mut self, page: u32, depth: f32, links: Option<&[Vec<u32>]>) -> Result<(), VmError> {
        if page == 0 {
            return Ok(());
        }
        let n = self.page_count();
        if page > n {
            return Err(VmError::PageOutOfRange { page, page_count: n });
        }
        let e = encode_depth(depth);
        let slot = &mut self.depth[page as usize];
        *slot = (*slot).max(e);
        self.direct[page as usize] = true;
        if let Some(links) = links {
            for &q in &links[page as usize - 1] {
                if q == 0 || q > n {
                    return Err(VmError::PageOutOfRange { page: q, page_count: n });
                }
                let slot = &mut self.depth[q as usize];
                *slot = (*slot).max(e);
            }
        }
        Ok(())
    }
}

/// Max-reduction of the visibility buffer into a required list. Linked pages
/// inherit the depth of the pixel that pulled them in. `links = None`
/// disables link expansion.
pub fn reduce_visibility(
    vis: &VisibilityBuffer,
    page_count: u32,
    links: Option<&[Vec<u32>]>,
) -> Result<RequiredList, VmError> {
    const CHUNK: usize = 4096;
    vis.page
        .par_chunks(CHUNK)
        .zip(vis.depth.par_chunks(CHUNK))
        .map(|(pages, depths)| {
            let mut r = RequiredList::new(page_count);
            for (&p, &d) in pages.iter().zip(depths) {
                r.visit(p, d, links)?;
            }
            Ok(r)
        })
        .try_reduce(|| RequiredList::new(page_count), |a, b| Ok(a.merge(&b)))
}

/// Single-threaded reference for [`reduce_visibility`].
pub fn reduce_visibility_sequential(
    vis: &VisibilityBuffer,
    page_count: u32,
    links: Option<&[Vec<u32>]>,
) -> Result<RequiredList, VmError> {
    let mut r = RequiredList::new(page_count);
    for (&p, &d) in vis.page.iter().zip(&vis.depth) {
        r.visit(p, d, links)?;
    }
    Ok(r)
}
