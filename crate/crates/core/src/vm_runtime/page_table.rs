use std::cmp::Reverse;

use super::controller::LodController;
use super::reduce::RequiredList;
use super::VmError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Slot {
    /// 0 when empty.
    pub page: u32,
    pub required: bool,
}

/// One physical page of the render buffer. At level `k` it holds `2^k`
/// virtual pages of `page_size >> k` records each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PageTableEntry {
    pub level: u32,
    pub last_used: u64,
    pub slots: Vec<Slot>,
}

impl PageTableEntry {
    fn empty() -> Self {
        PageTableEntry { level: 0, last_used: 0, slots: vec![Slot::default()] }
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(|s| s.page == 0)
    }

    pub fn has_required(&self) -> bool {
        self.slots.iter().any(|s| s.page != 0 && s.required)
    }

    fn reset(&mut self, level: u32) {
        self.level = level;
        self.slots = vec![Slot::default(); 1 << level];
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Location {
    pub entry: u32,
    pub slot: u32,
    pub level: u32,
}

/// Priority classes of copy requests, most urgent first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CopyClass {
    /// Seen in the visibility buffer, not resident.
    Visible,
    /// Only pulled in by a link, not resident.
    LinkOnly,
    /// Resident at another level.
    Transition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CopyOp {
    pub page: u32,
    pub class: CopyClass,
    pub to: Location,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdatePlan {
    pub ops: Vec<CopyOp>,
    pub required: usize,
    /// Required pages neither resident nor planned.
    pub missing: usize,
    /// Requests dropped because the staging budget ran out.
    pub over_budget: usize,
    /// Requests dropped because no slot could be freed.
    pub no_slot: usize,
}

/// Flat page table with a reverse index from page ID to location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PageTable {
    pub entries: Vec<PageTableEntry>,
    resident: Vec<Option<Location>>,
    page_size: u32,
    levels: u32,
}

impl PageTable {
    pub fn new(capacity: usize, page_count: u32, page_size: u32, levels: u32) -> PageTable {
        assert!(levels >= 1 && page_size % (1 << (levels - 1)) == 0);
        PageTable {
            entries: vec![PageTableEntry::empty(); capacity],
            resident: vec![None; page_count as usize + 1],
            page_size,
            levels,
        }
    }

    pub fn capacity(&self) -> usize {
        self.entries.len()
    }

    pub fn page_count(&self) -> u32 {
        self.resident.len() as u32 - 1
    }

    pub fn page_size(&self) -> u32 {
        self.page_size
    }

    pub fn location(&self, page: u32) -> Option<Location> {
        self.resident.get(page as usize).copied().flatten()
    }

    pub fn is_resident(&self, page: u32) -> bool {
        self.location(page).is_some()
    }

    /// Resident pages in ascending ID order with their locations.
    pub fn resident_pages(&self) -> impl Iterator<Item = (u32, Location)> + '_ {
        self.resident.iter().enumerate().filter_map(|(p, l)| l.map(|l| (p as u32, l)))
    }

    pub fn resident_per_level(&self) -> Vec<usize> {
        let mut out = vec![0; self.levels as usize];
        for (_, l) in self.resident_pages() {
            out[l.level as usize] += 1;
        }
        out
    }

    pub fn occupied_entries(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_empty()).count()
    }

    /// Fraction of entries holding at least one required page.
    pub fn usage_ratio(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.iter().filter(|e| e.has_required()).count() as f64 / self.entries.len() as f64
    }

    /// Records covered by a location in the render buffer.
    pub fn record_range(&self, loc: Location) -> std::ops::Range<usize> {
        let n = (self.page_size >> loc.level) as usize;
        let start = loc.entry as usize * self.page_size as usize + loc.slot as usize * n;
        start..start + n
    }

    /// Records one page costs against the staging budget.
    pub fn page_records(&self, level: u32) -> usize {
        (self.page_size >> level) as usize
    }

    fn evict_entry(&mut self, e: usize, level: u32) {
        for s in &self.entries[e].slots {
            if s.page != 0 {
                self.resident[s.page as usize] = None;
            }
        }
        self.entries[e].reset(level);
    }

    /// Finds a slot for a level-`level` page, evicting if needed: a free slot
    /// in an entry of that level, then an empty entry, then the least
    /// recently used entry without required pages, then an unrequired slot
    /// in an entry of that level.
    fn free_slot(&mut self, level: u32) -> Option<(u32, u32)> {
        let same_level = |e: &PageTableEntry| !e.is_empty() && e.level == level;
        if let Some(e) = self.entries.iter().position(|e| same_level(e) && e.slots.iter().any(|s| s.page == 0)) {
            let s = self.entries[e].slots.iter().position(|s| s.page == 0).expect("free slot");
            return Some((e as u32, s as u32));
        }
        if let Some(e) = self.entries.iter().position(|e| e.is_empty()) {
            self.entries[e].reset(level);
            return Some((e as u32, 0));
        }
        let lru = |pred: &dyn Fn(&PageTableEntry) -> bool| {
            self.entries
                .iter()
                .enumerate()
                .filter(|(_, e)| pred(e))
                .min_by_key(|(i, e)| (e.last_used, *i))
                .map(|(i, _)| i)
        };
        if let Some(e) = lru(&|e: &PageTableEntry| !e.has_required()) {
            self.evict_entry(e, level);
            return Some((e as u32, 0));
        }
        if let Some(e) = lru(&|e: &PageTableEntry| same_level(e) && e.slots.iter().any(|s| !s.required)) {
            let s = self.entries[e].slots.iter().position(|s| !s.required).expect("unrequired slot");
            let victim = self.entries[e].slots[s].page;
            self.resident[victim as usize] = None;
            self.entries[e].slots[s] = Slot::default();
            return Some((e as u32, s as u32));
        }
        None
    }

    /// Converts the entry holding `page` to `level` so the page can be
    /// re-copied over itself. Only allowed when no other required page shares
    /// the entry; unrequired neighbors are evicted.
    fn reuse_in_place(&mut self, page: u32, level: u32) -> Option<(u32, u32)> {
        let old = self.resident[page as usize]?;
        let e = old.entry as usize;
        if self.entries[e].slots.iter().any(|s| s.page != 0 && s.page != page && s.required) {
            return None;
        }
        for s in &self.entries[e].slots {
            if s.page != 0 && s.page != page {
                self.resident[s.page as usize] = None;
            }
        }
        self.entries[e].reset(level);
        Some((old.entry, 0))
    }

    /// Marks resident required pages, then reserves slots for the rest in
    /// priority order until `budget_records` worth of copies are planned.
    /// Reserved slots are filled by [`commit`](Self::commit) or released by
    /// [`revert`](Self::revert).
    pub fn update(
        &mut self,
        required: &RequiredList,
        controller: &LodController,
        frame: u64,
        budget_records: usize,
    ) -> Result<UpdatePlan, VmError> {
        let page_count = self.page_count();
        if required.page_count() != page_count {
            return Err(VmError::PageOutOfRange { page: required.page_count(), page_count });
        }
        for e in &mut self.entries {
            for s in &mut e.slots {
                s.required = false;
            }
        }
        let mut requests: Vec<(CopyClass, Reverse<u32>, u32, u32)> = Vec::new();
        let mut plan = UpdatePlan::default();
        for p in required.pages() {
            plan.required += 1;
            let depth = required.depth[p as usize];
            let level = controller.select_lod(depth).min(self.levels - 1);
            if let Some(loc) = self.resident[p as usize] {
                let entry = &mut self.entries[loc.entry as usize];
                entry.slots[loc.slot as usize].required = true;
                entry.last_used = frame;
                if loc.level != level {
                    requests.push((CopyClass::Transition, Reverse(depth), p, level));
                }
            } else {
                let class = if required.direct[p as usize] { CopyClass::Visible } else { CopyClass::LinkOnly };
                requests.push((class, Reverse(depth), p, level));
            }
        }
        requests.sort_unstable();

        let mut spent = 0usize;
        let mut planned = vec![false; requests.len()];
        for (i, &(class, _, page, level)) in requests.iter().enumerate() {
            let cost = self.page_records(level);
            if spent + cost > budget_records {
                plan.over_budget = requests.len() - i;
                break;
            }
            let found = match class {
                CopyClass::Transition => self.free_slot(level).or_else(|| self.reuse_in_place(page, level)),
                _ => self.free_slot(level),
            };
            let Some((entry, slot)) = found else {
                plan.no_slot += 1;
                continue;
            };
            let e = &mut self.entries[entry as usize];
            e.slots[slot as usize] = Slot { page, required: true };
            e.last_used = frame;
            plan.ops.push(CopyOp { page, class, to: Location { entry, slot, level } });
            planned[i] = true;
            spent += cost;
        }
        plan.missing = requests
            .iter()
            .zip(&planned)
            .filter(|((class, ..), &done)| !done && *class != CopyClass::Transition)
            .count();
        Ok(plan)
    }

    /// Makes a reserved slot the page's resident copy, releasing the slot of
    /// the level it replaces.
    pub fn commit(&mut self, op: &CopyOp) {
        if let Some(old) = self.resident[op.page as usize] {
            // An in-place transition already reset the old entry.
            if old.entry != op.to.entry {
                self.entries[old.entry as usize].slots[old.slot as usize] = Slot::default();
            }
        }
        self.resident[op.page as usize] = Some(op.to);
    }

    /// Releases a reserved slot whose copy did not happen. Ops of one plan
    /// must be reverted in reverse plan order.
    pub fn revert(&mut self, op: &CopyOp) {
        let entry = &mut self.entries[op.to.entry as usize];
        debug_assert_eq!(entry.slots[op.to.slot as usize].page, op.page);
        match self.resident[op.page as usize] {
            Some(old) if old.entry == op.to.entry => {
                entry.reset(old.level);
                entry.slots[old.slot as usize] = Slot { page: op.page, required: true };
            }
            _ => entry.slots[op.to.slot as usize] = Slot::default(),
        }
    }

    /// Cross-checks entries against the reverse index.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![false; self.resident.len()];
        for (i, e) in self.entries.iter().enumerate() {
            if e.slots.len() != 1usize << e.level {
                return Err(format!("entry {i} has {} slots at level {}", e.slots.len(), e.level));
            }
            for (s, slot) in e.slots.iter().enumerate() {
                if slot.page == 0 {
                    continue;
                }
                let p = slot.page as usize;
                if p >= self.resident.len() {
                    return Err(format!("entry {i} holds unknown page {p}"));
                }
                if seen[p] {
                    return Err(format!("page {p} resident twice"));
                }
                seen[p] = true;
                let want = Location { entry: i as u32, slot: s as u32, level: e.level };
                if self.resident[p] != Some(want) {
                    return Err(format!("page {p} index {:?} disagrees with entry {i} slot {s}", self.resident[p]));
                }
            }
        }
        for (p, l) in self.resident.iter().enumerate() {
            if l.is_some() && !seen[p] {
                return Err(format!("page {p} indexed but not stored"));
            }
        }
        Ok(())
    }
}
