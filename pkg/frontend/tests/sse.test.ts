import { describe, expect, it } from 'vitest';

import { SseParser } from '../src/api';

describe('sse parser', () => {
  it('parses complete frames', () => {
    const parser = new SseParser();
    const events = parser.push('id: 1\ndata: {"kind":"resync","seq":1,"payload":{}}\n\n');
    expect(events).toEqual([{ kind: 'resync', seq: 1, payload: {} }]);
  });

  it('reassembles frames split across chunks', () => {
    const parser = new SseParser();
    expect(parser.push('id: 2\ndata: {"kind":"device_seen","se')).toEqual([]);
    const events = parser.push('q":2,"payload":{"device_key":"x"}}\n\nid: 3\ndata: {"kind"');
    expect(events.length).toBe(1);
    expect(events[0].seq).toBe(2);
    const more = parser.push(':"traffic_sample","seq":3,"payload":{}}\n\n');
    expect(more[0].seq).toBe(3);
  });

  it('ignores keepalive comments and malformed frames', () => {
    const parser = new SseParser();
    expect(parser.push(': keepalive\n\n')).toEqual([]);
    expect(parser.push('data: {broken json}\n\n')).toEqual([]);
  });

  it('handles several events in one chunk in order', () => {
    const parser = new SseParser();
    const chunk =
      'data: {"kind":"device_seen","seq":1,"payload":{}}\n\n' +
      'data: {"kind":"device_seen","seq":2,"payload":{}}\n\n';
    expect(parser.push(chunk).map((e) => e.seq)).toEqual([1, 2]);
  });
});
