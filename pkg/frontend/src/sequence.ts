/**
 * One in-flight query at a time per view: responses are applied only if no
 * newer submission happened while they were in flight.
 */
export class RequestSequencer {
  private seq = 0;

  next(): number {
    return ++this.seq;
  }

  isCurrent(token: number): boolean {
    return token === this.seq;
  }
}
