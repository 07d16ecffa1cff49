export interface EntityRecord {
  text: string;
  start: number;
  end: number;
  verification: 'exact' | 'relocated' | 'unverifiable';
  claimed_start: number;
  claimed_end: number;
}

export interface SampleListItem {
  sample_id: string;
  rated: { A: boolean; B: boolean };
}

export interface Sample {
  sample_id: string;
  instance_id: string;
  text: string;
  event_type: string;
  outputs: { A: EntityRecord[]; B: EntityRecord[] };
  own_ratings: Partial<Record<'A' | 'B', number>>;
}

export interface Progress {
  rated: number;
  total: number;
}

export type SystemLabel = 'A' | 'B';

export interface RatingSubmission {
  sample_id: string;
  annotator_id: string;
  system_label: SystemLabel;
  score: number;
}
