package ledger;

import java.math.BigDecimal;
import java.time.LocalDate;
import java.util.ArrayList;
import java.util.Collections;
import java.util.List;

public final class Transaction {
    private final String reference;
    private final LocalDate date;
    private final List<Entry> entries = new ArrayList<>();

    public static final class Entry {
        final Account account;
        final BigDecimal amount;
        final boolean debit;

        Entry(Account account, BigDecimal amount, boolean debit) {
            if (amount.signum() <= 0) {
                throw new IllegalArgumentException("entry amount must be positive");
            }
            this.account = account;
            this.amount = amount;
            this.debit = debit;
        }

        public Account getAccount() {
            return account;
        }

        public BigDecimal getAmount() {
            return amount;
        }

        public boolean isDebit() {
            return debit;
        }
    }

    public Transaction(String reference, LocalDate date) {
        this.reference = reference;
        this.date = date;
    }

    public Transaction debit(Account account, BigDecimal amount) {
        entries.add(new Entry(account, amount, true));
        return this;
    }

    public Transaction credit(Account account, BigDecimal amount) {
        entries.add(new Entry(account, amount, false));
        return this;
    }

    public boolean isBalanced() {
        BigDecimal debits = BigDecimal.ZERO;
        BigDecimal credits = BigDecimal.ZERO;
        for (Entry entry : entries) {
            if (entry.debit) {
                debits = debits.add(entry.amount);
            } else {
                credits = credits.add(entry.amount);
            }
        }
        return debits.compareTo(credits) == 0 && !entries.isEmpty();
    }

    public String getReference() {
        return reference;
    }

    public LocalDate getDate() {
        return date;
    }

    public List<Entry> getEntries() {
        return Collections.unmodifiableList(entries);
    }
}
